"""Out-of-sample evaluation: mean squared forecast error over horizons and
maturities, residual summaries, and the comparison-table layout."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_io import YieldPanel


@dataclass(frozen=True)
class EvalReport:
    methods: tuple[str, ...]
    horizons: tuple[int, ...]
    maturities: tuple[float, ...]
    msfe: np.ndarray                 # method x horizon x maturity
    metadata: dict[str, str] = field(default_factory=dict)


def msfe(forecast: np.ndarray, actual: np.ndarray) -> np.ndarray:
    """Per-column mean of squared forecast errors."""
    forecast = np.asarray(forecast, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if forecast.shape != actual.shape:
        raise ValueError(
            f"forecast shape {forecast.shape} does not match actual {actual.shape}"
        )
    err = forecast - actual
    return np.atleast_2d(err**2).mean(axis=0)


def residual_stats(residuals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-maturity means and standard deviations of measurement residuals."""
    residuals = np.asarray(residuals, dtype=float)
    return residuals.mean(axis=0), residuals.std(axis=0, ddof=1)


def evaluate_horizons(
    forecasts: dict[str, np.ndarray],
    test_panel: YieldPanel,
    horizons,
    path_average: bool = False,
    metadata: dict[str, str] | None = None,
) -> EvalReport:
    """MSFE of fixed-origin path forecasts against the realized test panel.

    Each method's matrix has row h-1 holding the h-step-ahead forecast made
    at the train-set end, columns ordered like the panel maturities. The
    default scores the single point at T+h; `path_average` scores the whole
    path up to h instead.
    """
    horizons = tuple(int(h) for h in horizons)
    if not horizons or min(horizons) < 1:
        raise ValueError("horizons must be positive integers")
    t_test = test_panel.n_dates
    if max(horizons) > t_test:
        raise ValueError(
            f"horizon {max(horizons)} exceeds the {t_test}-month test coverage"
        )
    methods = tuple(forecasts)
    m = len(test_panel.maturities)
    out = np.empty((len(methods), len(horizons), m))
    actual = test_panel.yields
    for i, name in enumerate(methods):
        fc = np.asarray(forecasts[name], dtype=float)
        if fc.ndim != 2 or fc.shape[1] != m:
            raise ValueError(
                f"forecast {name!r} must have {m} maturity columns, got {fc.shape}"
            )
        if fc.shape[0] < max(horizons):
            raise ValueError(
                f"forecast {name!r} covers {fc.shape[0]} horizons, need {max(horizons)}"
            )
        for j, h in enumerate(horizons):
            if path_average:
                out[i, j] = msfe(fc[:h], actual[:h])
            else:
                out[i, j] = msfe(fc[h - 1 : h], actual[h - 1 : h])
    return EvalReport(
        methods,
        horizons,
        tuple(float(m_) for m_ in test_panel.maturities),
        out,
        dict(metadata or {}),
    )


def msfe_rolling(
    forecasts_by_origin: dict[int, np.ndarray],
    test_panel: YieldPanel,
    horizon: int,
) -> np.ndarray:
    """Rolling-origin MSFE at one horizon.

    Keys are origin offsets into the test window (0 = train end); each value
    is a forecast matrix from that origin. Only origins whose target
    origin + horizon lies inside the test window contribute.
    """
    errs = []
    actual = test_panel.yields
    for origin, fc in sorted(forecasts_by_origin.items()):
        target = origin + horizon - 1
        if target >= actual.shape[0]:
            continue
        errs.append((np.asarray(fc)[horizon - 1] - actual[target]) ** 2)
    if not errs:
        raise ValueError("no origin reaches the requested horizon")
    return np.mean(errs, axis=0)


def save_eval_report(report: EvalReport, path: str | Path, header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        for key in sorted(report.metadata):
            fh.write(f"# {key} = {report.metadata[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(["method", "horizon", "maturity", "msfe"])
        for i, method in enumerate(report.methods):
            for j, h in enumerate(report.horizons):
                for k_, mat in enumerate(report.maturities):
                    writer.writerow(
                        [method, h, f"{mat:g}", repr(float(report.msfe[i, j, k_]))]
                    )


def save_residual_stats(
    names, means: np.ndarray, sds: np.ndarray, path: str | Path, header_comment: str = ""
) -> None:
    """Residual mean/sd table (input units plus basis points)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["column", "mean", "sd", "mean_bps", "sd_bps"])
        for i, name in enumerate(names):
            writer.writerow(
                [
                    name,
                    repr(float(means[i])),
                    repr(float(sds[i])),
                    repr(float(means[i] * 100.0)),
                    repr(float(sds[i] * 100.0)),
                ]
            )
