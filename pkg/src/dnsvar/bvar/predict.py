"""Predictive distributions by composition sampling and the mapping from
factor forecasts back to yields."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal, norm

from ..linalg import psd_factor
from ..ns_factors import NsLoadings
from ..var_engine import PathForecast, var_step
from .design import VarDesign, phi_to_coeffs
from .posteriors import PosteriorDraws

DEFAULT_QUANTILES = (0.05, 0.5, 0.95)


@dataclass(frozen=True)
class PredictiveDistribution:
    names: tuple[str, ...]
    horizons: np.ndarray                     # 1..H
    mean: np.ndarray                         # H x k
    sd: np.ndarray                           # H x k
    quantiles: dict[float, np.ndarray]       # level -> H x k
    paths: np.ndarray                        # n_draws x H x k
    log_predictive_likelihood: float | None
    seed: int


@dataclass(frozen=True)
class YieldForecast:
    maturities: tuple[float, ...]
    horizons: np.ndarray
    mean: np.ndarray                         # H x M
    sd: np.ndarray
    quantiles: dict[float, np.ndarray]


def _next_regressor(history: np.ndarray, intercept: bool) -> np.ndarray:
    """[1, f'_{t-1}, ..., f'_{t-p}] built from history rows oldest..newest."""
    parts = [np.ones(1)] if intercept else []
    for lag in range(1, history.shape[0] + 1):
        parts.append(history[-lag])
    return np.concatenate(parts)


def predict(
    draws: PosteriorDraws,
    design: VarDesign,
    horizons,
    realized: np.ndarray | None = None,
    seed: int = 0,
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILES,
) -> PredictiveDistribution:
    """Simulate each retained draw forward with Gaussian innovations from
    that draw's Σ; summarize per horizon.

    The log predictive likelihood at a supplied realized next observation
    is the log of the draw-averaged one-step Gaussian density.
    """
    if np.ndim(horizons) == 0:
        h_max = int(horizons)
    else:
        h_max = int(max(horizons))
    if h_max < 1:
        raise ValueError("need at least one forecast horizon")
    if draws.n_draws == 0:
        raise ValueError("no retained draws to predict from")
    k, p = draws.k, draws.p
    n = draws.n_draws
    history = design.history()
    if history.shape != (p, k):
        raise ValueError("design history does not match the draw dimensions")

    paths = np.empty((n, h_max, k))
    for s in range(n):
        a0_s, coeffs_s = phi_to_coeffs(draws.phi[s], k, p, draws.intercept)
        chol_s = psd_factor(draws.sigma[s])
        # per-draw noise stream keyed by (seed, draw index): scheduling-independent
        rng = np.random.default_rng([seed, s])
        shocks = rng.standard_normal((h_max, k)) @ chol_s.T
        hist = history.copy()
        for h in range(h_max):
            nxt = var_step(a0_s, coeffs_s, hist) + shocks[h]
            paths[s, h] = nxt
            hist = np.vstack([hist[1:], nxt]) if p > 1 else nxt[None, :]

    mean = paths.mean(axis=0)
    sd = paths.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    quantiles = {
        float(q): np.quantile(paths, q, axis=0) for q in quantile_levels
    }

    lpl = None
    if realized is not None:
        realized = np.asarray(realized, dtype=float).reshape(k)
        g_next = _next_regressor(history, draws.intercept)
        logdens = np.empty(n)
        for s in range(n):
            mean_s = draws.phi[s].T @ g_next
            logdens[s] = multivariate_normal.logpdf(
                realized, mean_s, draws.sigma[s], allow_singular=True
            )
        lpl = float(logsumexp(logdens) - np.log(n))

    return PredictiveDistribution(
        draws.names, np.arange(1, h_max + 1), mean, sd, quantiles, paths, lpl, seed
    )


def reconstruct_yields(forecast, loadings: NsLoadings) -> YieldForecast:
    """Map factor forecasts to per-maturity yield forecasts.

    Accepts a simulated PredictiveDistribution (transformed draw by draw)
    or a Gaussian PathForecast (mean/covariance mapped through the loading
    matrix). Macro columns beyond the three factors are dropped.
    """
    lam_mat = loadings.matrix
    if isinstance(forecast, PredictiveDistribution):
        if forecast.paths.shape[2] < 3:
            raise ValueError("factor forecast must carry at least 3 factor columns")
        ypaths = forecast.paths[:, :, :3] @ lam_mat.T
        mean = ypaths.mean(axis=0)
        n = ypaths.shape[0]
        sd = ypaths.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
        quantiles = {
            q: np.quantile(ypaths, q, axis=0) for q in sorted(forecast.quantiles)
        }
        return YieldForecast(loadings.maturities, forecast.horizons.copy(), mean, sd, quantiles)
    if isinstance(forecast, PathForecast):
        if forecast.mean.shape[1] < 3:
            raise ValueError("factor forecast must carry at least 3 factor columns")
        mean = forecast.mean[:, :3] @ lam_mat.T
        h_len = mean.shape[0]
        var = np.empty((h_len, len(loadings.maturities)))
        for h in range(h_len):
            var[h] = np.diag(lam_mat @ forecast.cov[h][:3, :3] @ lam_mat.T)
        sd = np.sqrt(np.maximum(var, 0.0))
        quantiles = {
            q: mean + norm.ppf(q) * sd for q in DEFAULT_QUANTILES
        }
        return YieldForecast(loadings.maturities, forecast.horizons.copy(), mean, sd, quantiles)
    raise ValueError(f"cannot reconstruct yields from {type(forecast).__name__}")


def save_predictive(
    pred: PredictiveDistribution, path: str | Path, header_comment: str = ""
) -> None:
    levels = sorted(pred.quantiles)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        if pred.log_predictive_likelihood is not None:
            fh.write(f"# log_predictive_likelihood = {pred.log_predictive_likelihood!r}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["horizon", "variable", "mean", "sd", *[f"q{q:g}" for q in levels]]
        )
        for i, h in enumerate(pred.horizons):
            for j, name in enumerate(pred.names):
                writer.writerow(
                    [
                        int(h),
                        name,
                        repr(float(pred.mean[i, j])),
                        repr(float(pred.sd[i, j])),
                        *[repr(float(pred.quantiles[q][i, j])) for q in levels],
                    ]
                )


def save_yield_forecast(
    fc: YieldForecast, path: str | Path, header_comment: str = ""
) -> None:
    levels = sorted(fc.quantiles)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["horizon", "maturity", "mean", "sd", *[f"q{q:g}" for q in levels]]
        )
        for i, h in enumerate(fc.horizons):
            for j, m in enumerate(fc.maturities):
                writer.writerow(
                    [
                        int(h),
                        f"{m:g}",
                        repr(float(fc.mean[i, j])),
                        repr(float(fc.sd[i, j])),
                        *[repr(float(fc.quantiles[q][i, j])) for q in levels],
                    ]
                )


def load_yield_forecast(path: str | Path) -> YieldForecast:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    header, data = rows[0], rows[1:]
    qlevels = [float(c[1:]) for c in header[4:]]
    horizons = sorted({int(r[0]) for r in data})
    maturities = sorted({float(r[1]) for r in data})
    h_index = {h: i for i, h in enumerate(horizons)}
    m_index = {m: j for j, m in enumerate(maturities)}
    mean = np.empty((len(horizons), len(maturities)))
    sd = np.empty_like(mean)
    quantiles = {q: np.empty_like(mean) for q in qlevels}
    for r in data:
        i, j = h_index[int(r[0])], m_index[float(r[1])]
        mean[i, j] = float(r[2])
        sd[i, j] = float(r[3])
        for qi, q in enumerate(qlevels):
            quantiles[q][i, j] = float(r[4 + qi])
    return YieldForecast(
        tuple(maturities), np.asarray(horizons), mean, sd, quantiles
    )
