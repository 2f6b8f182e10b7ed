"""Frequentist VAR(p): multivariate least squares, lag selection by AIC,
companion form, and h-step path forecasts with Gaussian bands.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import NumericError
from .linalg import companion_matrix, spectral_radius, symmetrize
from .ns_factors import FactorSeries

DEFAULT_BAND_LEVELS = (0.5, 0.8, 0.95)


@dataclass(frozen=True)
class VarModel:
    names: tuple[str, ...]
    p: int
    intercept: bool
    a0: np.ndarray                 # k-vector, zeros when intercept excluded
    coeffs: tuple[np.ndarray, ...]  # A_1 .. A_p, each k x k
    sigma: np.ndarray              # residual covariance
    residuals: np.ndarray          # (T - p) x k

    @property
    def k(self) -> int:
        return len(self.names)

    def companion(self) -> np.ndarray:
        return companion_matrix(list(self.coeffs))

    def stable(self) -> bool:
        return spectral_radius(self.companion()) < 1.0

    def long_run_mean(self) -> np.ndarray:
        """(I - sum A_i)^{-1} a0; only meaningful for stable systems."""
        return np.linalg.solve(np.eye(self.k) - sum(self.coeffs), self.a0)


@dataclass(frozen=True)
class PathForecast:
    names: tuple[str, ...]
    horizons: np.ndarray           # 1..H
    mean: np.ndarray               # H x k
    cov: np.ndarray                # H x k x k
    bands: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def sd(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diagonal(self.cov, axis1=1, axis2=2), 0.0))


def lagged_design(values: np.ndarray, p: int, intercept: bool, start: int | None = None):
    """Stack [1, f'_{t-1}, ..., f'_{t-p}] rows for t = start..T-1 (0-based).

    Returns (Y, X) with Y the rows being explained. `start` defaults to p.
    """
    values = np.asarray(values, dtype=float)
    t, k = values.shape
    if start is None:
        start = p
    if start < p:
        raise ValueError("start must be >= p")
    rows = t - start
    if rows <= 0:
        raise ValueError(f"sample of {t} rows leaves no observations after {start} lags")
    blocks = [np.ones((rows, 1))] if intercept else []
    for lag in range(1, p + 1):
        blocks.append(values[start - lag : t - lag])
    x = np.hstack(blocks) if blocks else np.empty((rows, 0))
    return values[start:], x


def var_step(a0: np.ndarray, coeffs, history: np.ndarray) -> np.ndarray:
    """One conditional-mean step; history rows are oldest..newest, p rows."""
    out = np.array(a0, dtype=float, copy=True)
    for lag, a_l in enumerate(coeffs, start=1):
        out += a_l @ history[-lag]
    return out


def fit_var(data: FactorSeries, p: int, intercept: bool = True, ml_sigma: bool = False) -> VarModel:
    """Equation-by-equation least squares with the identical regressor set.

    The residual covariance uses the degrees-of-freedom denominator
    T_eff - r by default; `ml_sigma` switches to the maximum-likelihood
    T_eff denominator.
    """
    if p < 1:
        raise ValueError("lag order must be >= 1")
    values = data.values
    t, k = values.shape
    r = k * p + (1 if intercept else 0)
    if t - p <= r:
        raise ValueError(
            f"sample too short: T - p = {t - p} must exceed {r} regressors"
        )
    y, x = lagged_design(values, p, intercept)
    beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise NumericError("singular regressor cross-product in VAR fit")
    resid = y - x @ beta
    denom = (t - p) if ml_sigma else (t - p - r)
    if denom <= 0:
        raise ValueError("not enough observations for the residual covariance")
    sigma = symmetrize(resid.T @ resid / denom)
    a0 = beta[0] if intercept else np.zeros(k)
    lag_rows = beta[1:] if intercept else beta
    coeffs = tuple(lag_rows[i * k : (i + 1) * k].T for i in range(p))
    return VarModel(data.names, p, intercept, a0, coeffs, sigma, resid)


def select_lag_aic(data: FactorSeries, p_max: int) -> int:
    """Lag order minimizing log det Σ̂(p) + 2(k²p + k)/T on the common sample."""
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    values = data.values
    t, k = values.shape
    best_p, best_aic = 1, np.inf
    for p in range(1, p_max + 1):
        y, x = lagged_design(values, p, intercept=True, start=p_max)
        t_eff = y.shape[0]
        if t_eff <= x.shape[1]:
            raise ValueError(f"sample does not support p_max={p_max}")
        beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
        if rank < x.shape[1]:
            raise NumericError(f"singular regressors at lag {p}")
        resid = y - x @ beta
        sigma_ml = resid.T @ resid / t_eff
        sign, logdet = np.linalg.slogdet(sigma_ml)
        if sign <= 0:
            raise NumericError(f"non-PD residual covariance at lag {p}")
        aic = logdet + 2.0 * (k * k * p + k) / t_eff
        if aic < best_aic:
            best_p, best_aic = p, aic
    return best_p


def forecast_path(
    model: VarModel,
    last_obs: np.ndarray,
    horizon: int,
    levels: tuple[float, ...] = DEFAULT_BAND_LEVELS,
) -> PathForecast:
    """Mean path by forward recursion; covariance by MA accumulation.

    `last_obs` holds the final p observations, rows oldest..newest.
    """
    if horizon < 1:
        raise ValueError("forecast horizon must be >= 1")
    last_obs = np.atleast_2d(np.asarray(last_obs, dtype=float))
    k, p = model.k, model.p
    if last_obs.shape != (p, k):
        raise ValueError(f"last_obs must be {p} x {k}, got {last_obs.shape}")

    history = list(last_obs)
    mean = np.empty((horizon, k))
    for h in range(horizon):
        nxt = var_step(model.a0, model.coeffs, np.asarray(history[-p:]))
        mean[h] = nxt
        history.append(nxt)

    comp = model.companion()
    select = np.zeros((k * p, k))
    select[:k, :k] = np.eye(k)
    cov = np.empty((horizon, k, k))
    psi_power = np.eye(k * p)
    acc = np.zeros((k, k))
    for h in range(horizon):
        psi = select.T @ psi_power @ select
        acc = acc + psi @ model.sigma @ psi.T
        cov[h] = symmetrize(acc)
        psi_power = comp @ psi_power

    bands: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    sd = np.sqrt(np.maximum(np.diagonal(cov, axis1=1, axis2=2), 0.0))
    for level in levels:
        z = norm.ppf(0.5 + level / 2.0)
        bands[level] = (mean - z * sd, mean + z * sd)
    return PathForecast(model.names, np.arange(1, horizon + 1), mean, cov, bands)


def save_var_model(model: VarModel, path: str | Path, header_comment: str = "") -> None:
    """Coefficient table: one row per (equation, regressor)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["equation", "regressor", "coefficient"])
        for i, eq in enumerate(model.names):
            if model.intercept:
                writer.writerow([eq, "const", repr(float(model.a0[i]))])
            for lag, a_l in enumerate(model.coeffs, start=1):
                for j, var in enumerate(model.names):
                    writer.writerow([eq, f"{var}.l{lag}", repr(float(a_l[i, j]))])
        writer.writerow([])
        writer.writerow(["sigma_row", *model.names])
        for i, eq in enumerate(model.names):
            writer.writerow([eq, *[repr(float(v)) for v in model.sigma[i]]])


def save_eigen_report(model: VarModel, path: str | Path, header_comment: str = "") -> None:
    eigs = np.linalg.eigvals(model.companion())
    with open(path, "w", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(f"companion spectral radius: {spectral_radius(model.companion())!r}\n")
        fh.write(f"stable: {model.stable()}\n")
        for e in sorted(eigs, key=lambda z: -abs(z)):
            fh.write(f"eigenvalue: {e.real:+.12f} {e.imag:+.12f}i  modulus {abs(e):.12f}\n")


def save_path_forecast(forecast: PathForecast, path: str | Path, header_comment: str = "") -> None:
    sd = forecast.sd()
    levels = sorted(forecast.bands)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        cols = ["horizon", "variable", "mean", "sd"]
        for level in levels:
            tag = f"{level:g}"
            cols += [f"lower_{tag}", f"upper_{tag}"]
        writer.writerow(cols)
        for h_idx, h in enumerate(forecast.horizons):
            for j, name in enumerate(forecast.names):
                row = [int(h), name, repr(float(forecast.mean[h_idx, j])), repr(float(sd[h_idx, j]))]
                for level in levels:
                    lo, hi = forecast.bands[level]
                    row += [repr(float(lo[h_idx, j])), repr(float(hi[h_idx, j]))]
                writer.writerow(row)
