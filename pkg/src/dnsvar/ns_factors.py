"""Nelson-Siegel loadings, decay-rate calibration, cross-sectional factor
extraction, empirical factor proxies and principal-component factors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import lstsq
from scipy.optimize import brentq

from .data_io import YieldPanel
from .errors import NumericError

# below this, (1 - exp(-x))/x is evaluated by series expansion to avoid 0/0
_SERIES_CUTOFF = 1e-6


def _slope_loading(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    out[small] = 1.0 - x[small] / 2.0 + x[small] ** 2 / 6.0
    xs = x[~small]
    out[~small] = (1.0 - np.exp(-xs)) / xs
    return out


def _curvature_loading(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    # (1 - e^-x)/x - e^-x = x/2 - x^2/3 + O(x^3)
    out[small] = x[small] / 2.0 - x[small] ** 2 / 3.0
    xs = x[~small]
    out[~small] = (1.0 - np.exp(-xs)) / xs - np.exp(-xs)
    return out


@dataclass(frozen=True)
class NsLoadings:
    """M x 3 loading matrix for a decay rate: level, slope, curvature columns."""

    lam: float
    maturities: tuple[float, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        self.matrix.flags.writeable = False


@dataclass(frozen=True)
class FactorSeries:
    """Named time series used as VAR data (latent factors, possibly macro)."""

    dates: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(self.dates), len(self.names)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.dates)} dates x {len(self.names)} names"
            )
        object.__setattr__(self, "values", values)
        self.values.flags.writeable = False

    @property
    def k(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class CrossSectionFit:
    factors: FactorSeries
    residuals: np.ndarray  # T x M, per-date measurement residuals


@dataclass(frozen=True)
class PcaResult:
    means: np.ndarray       # per-column means removed
    components: np.ndarray  # M x k orthonormal loading vectors
    scores: np.ndarray      # T x k
    explained: np.ndarray   # k proportions of total variance
    scales: np.ndarray | None = None  # per-column sds when standardized


def ns_loadings(lam: float, maturities) -> NsLoadings:
    """Loading matrix [1, (1-e^-λτ)/(λτ), (1-e^-λτ)/(λτ) - e^-λτ] per maturity."""
    if lam <= 0:
        raise ValueError(f"decay rate must be positive, got {lam}")
    taus = np.asarray(maturities, dtype=float)
    if np.any(taus <= 0):
        raise ValueError("maturities must all be positive")
    x = lam * taus
    matrix = np.column_stack(
        [np.ones_like(taus), _slope_loading(x), _curvature_loading(x)]
    )
    return NsLoadings(float(lam), tuple(float(t) for t in taus), matrix)


def curvature_peak_product() -> float:
    """The value x* of λτ at which the curvature loading attains its maximum.

    Stationarity of (1-e^-x)/x - e^-x reduces to e^x = 1 + x + x^2.
    """

    def deriv(x: float) -> float:
        return (x * np.exp(-x) - 1 + np.exp(-x)) / x**2 + np.exp(-x)

    try:
        x_star = brentq(deriv, 0.5, 5.0, xtol=1e-13, rtol=8.9e-16)
    except (RuntimeError, ValueError) as exc:
        raise NumericError(f"curvature peak root-finding failed: {exc}")
    if abs(deriv(x_star)) > 1e-10:
        raise NumericError("curvature peak stationarity residual too large")
    return float(x_star)


def solve_lambda(target_maturity: float) -> float:
    """Decay rate whose curvature loading peaks at the given maturity (months)."""
    if target_maturity <= 0:
        raise ValueError("target maturity must be positive")
    return curvature_peak_product() / float(target_maturity)


def fit_cross_section(panel: YieldPanel, lam: float) -> CrossSectionFit:
    """Per-date least squares of yields on the fixed-λ loading matrix.

    Uses a column-pivoted QR solver (stable for the near-collinear loadings
    that arise at small λ).
    """
    if len(panel.maturities) < 3:
        raise ValueError("need at least 3 maturities to extract 3 factors")
    loadings = ns_loadings(lam, panel.maturities)
    if np.linalg.matrix_rank(loadings.matrix) < 3:
        raise NumericError("loading matrix is rank deficient")
    # one solve for all dates: Λ (M x 3), Y' (M x T)
    coef, _, _, _ = lstsq(loadings.matrix, panel.yields.T, lapack_driver="gelsy")
    factors = coef.T
    residuals = panel.yields - factors @ loadings.matrix.T
    series = FactorSeries(panel.dates, ("L", "S", "C"), factors)
    return CrossSectionFit(series, residuals)


def empirical_proxies(panel: YieldPanel) -> FactorSeries:
    """Model-free level/slope/curvature measures from 10y, 3m and 2y yields."""
    for needed in (3, 24, 120):
        if needed not in panel.maturities:
            raise ValueError(f"empirical proxies need the {needed}-month maturity")
    y3 = panel.yield_at(3)
    y24 = panel.yield_at(24)
    y120 = panel.yield_at(120)
    values = np.column_stack([y120, y3 - y120, 2.0 * y24 - y120 - y3])
    return FactorSeries(panel.dates, ("level", "slope", "curvature"), values)


def pca(matrix: np.ndarray, k: int, standardize: bool = False) -> PcaResult:
    """Top-k principal components of the demeaned (optionally scaled) data.

    Components are orthonormal eigenvectors of the sample covariance, sign
    fixed so each component's largest-magnitude entry is positive; explained
    proportions are over the full eigenvalue spectrum.
    """
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2:
        raise ValueError("pca expects a 2-D data matrix")
    t, m = data.shape
    if t < 2:
        raise ValueError("pca needs at least two rows")
    if not 1 <= k <= min(t, m):
        raise ValueError(f"component count {k} out of range [1, {min(t, m)}]")
    means = data.mean(axis=0)
    centered = data - means
    scales = None
    if standardize:
        scales = centered.std(axis=0, ddof=1)
        if np.any(scales == 0):
            raise NumericError("cannot standardize a constant column")
        centered = centered / scales
    cov = (centered.T @ centered) / (t - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    components = eigvecs[:, :k].copy()
    for j in range(k):
        lead = np.argmax(np.abs(components[:, j]))
        if components[lead, j] < 0:
            components[:, j] = -components[:, j]
    scores = centered @ components
    total = eigvals.sum()
    explained = eigvals[:k] / total if total > 0 else np.zeros(k)
    return PcaResult(means, components, scores, explained, scales)


def save_factor_series(series: FactorSeries, path: str | Path, header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["date", *series.names])
        for i, date in enumerate(series.dates):
            writer.writerow([date, *[repr(v) for v in series.values[i]]])


def load_factor_series(path: str | Path) -> FactorSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    header, data = rows[0], rows[1:]
    dates = tuple(r[0] for r in data)
    values = np.array([[float(v) for v in r[1:]] for r in data])
    return FactorSeries(dates, tuple(header[1:]), values)


def save_loadings(loadings: NsLoadings, path: str | Path, header_comment: str = "") -> None:
    """Loadings-by-maturity table, the data behind a factor-loading plot."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["maturity", "level", "slope", "curvature"])
        for tau, row in zip(loadings.maturities, loadings.matrix):
            writer.writerow([repr(tau), *[repr(v) for v in row]])
