"""Batch command-line front end.

Subcommands: describe, fit-two-step, fit-pca, fit-kalman, bvar, irf,
sign-irf, evaluate. Every command takes --config (flat key-value file) and
--seed, writes CSV/text artifacts plus a manifest into the configured run
directory, and is a pure function of (config, input files, seed): reruns
are byte-identical. Exit codes: 0 success, 2 usage/config/data error,
3 numeric or model error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import evaluation, ns_factors, state_space, structural, var_engine
from .bvar import (
    IndepNIW,
    Minnesota,
    NaturalConjugate,
    Ssvs,
    build_design,
    conjugate_posterior,
    diffuse_posterior,
    gibbs_indep_niw,
    gibbs_ssvs,
    load_draws,
    minnesota_posterior,
    predict,
    reconstruct_yields,
    save_draws,
)
from .bvar.design import fit_ar1_residual_scales
from .bvar.predict import load_yield_forecast, save_predictive, save_yield_forecast
from .config import RunConfig
from .data_io import PanelSchema, describe, load_panel, save_stats, split_panel
from .errors import ConfigError, DataError, NumericError
from .ns_factors import (
    FactorSeries,
    fit_cross_section,
    ns_loadings,
    save_factor_series,
    save_loadings,
    solve_lambda,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULT_HORIZONS = (6, 12, 18, 24, 30, 36, 42, 48, 54)


def _provenance(cfg: RunConfig, seed: int) -> str:
    return f"config_hash={cfg.config_hash()} seed={seed}"


def _run_dir(cfg: RunConfig) -> Path:
    out = cfg.get_path("output.dir")
    if out is None:
        raise ConfigError("config must set output.dir")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out_dir: Path, files: list[Path], header: str) -> Path:
    manifest = out_dir / "manifest.txt"
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        for path in sorted(files, key=lambda p: p.name):
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            fh.write(f"{digest}  {path.name}\n")
    return manifest


def _load_configured_panel(cfg: RunConfig):
    path = cfg.get_path("data.path")
    if path is None:
        raise ConfigError("config must set data.path")
    schema = PanelSchema.from_mapping(cfg.subsection("schema"))
    return load_panel(path, schema)


def _split(cfg: RunConfig, panel):
    fraction = cfg.get_float("split.train_fraction", 0.85)
    return split_panel(panel, fraction)


def _decay_rate(cfg: RunConfig) -> float:
    lam = cfg.get_float("ns.lambda")
    if lam is not None:
        return lam
    target = cfg.get_float("ns.lambda_target")
    if target is not None:
        return solve_lambda(target)
    return 0.0598


def _factor_series(cfg: RunConfig, panel, lam: float) -> FactorSeries:
    """Cross-sectional factors, optionally augmented with macro columns."""
    factors = fit_cross_section(panel, lam).factors
    macro_names = cfg.get_str_list("bvar.macro")
    if not macro_names:
        return factors
    for name in macro_names:
        if name not in panel.macro_names:
            raise ConfigError(f"macro column {name!r} not present in the panel")
    cols = [panel.macro[:, panel.macro_names.index(n)] for n in macro_names]
    values = np.column_stack([factors.values, *cols])
    return FactorSeries(panel.dates, factors.names + tuple(macro_names), values)


def cmd_describe(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    panel = _load_configured_panel(cfg)
    stats = describe(panel)
    path = out_dir / "statistics.csv"
    save_stats(stats, path, header)
    return [path]


def cmd_fit_two_step(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    panel = _load_configured_panel(cfg)
    split = _split(cfg, panel)
    lam = _decay_rate(cfg)
    files: list[Path] = []

    loadings = ns_loadings(lam, split.train.maturities)
    save_loadings(loadings, out_dir / "loadings.csv", header)
    files.append(out_dir / "loadings.csv")

    fit = fit_cross_section(split.train, lam)
    save_factor_series(fit.factors, out_dir / "factors.csv", header)
    files.append(out_dir / "factors.csv")

    means, sds = evaluation.residual_stats(fit.residuals)
    evaluation.save_residual_stats(
        [str(m) for m in split.train.maturities], means, sds,
        out_dir / "residual_stats.csv", header,
    )
    files.append(out_dir / "residual_stats.csv")

    try:
        proxies = ns_factors.empirical_proxies(split.train)
    except ValueError:
        proxies = None
    if proxies is not None:
        save_factor_series(proxies, out_dir / "proxies.csv", header)
        files.append(out_dir / "proxies.csv")

    p = cfg.get_int("var.lags", 1)
    model = var_engine.fit_var(fit.factors, p)
    var_engine.save_var_model(model, out_dir / "var_model.csv", header)
    var_engine.save_eigen_report(model, out_dir / "eigen_report.txt", header)
    files += [out_dir / "var_model.csv", out_dir / "eigen_report.txt"]

    horizon = cfg.get_int("forecast.horizon", 56)
    forecast = var_engine.forecast_path(model, fit.factors.values[-p:], horizon)
    var_engine.save_path_forecast(forecast, out_dir / "factor_forecast.csv", header)
    files.append(out_dir / "factor_forecast.csv")

    yields_fc = reconstruct_yields(forecast, loadings)
    save_yield_forecast(yields_fc, out_dir / "yield_forecast.csv", header)
    files.append(out_dir / "yield_forecast.csv")

    files.append(_write_manifest(out_dir, files, header))
    return files


def cmd_fit_pca(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    panel = _load_configured_panel(cfg)
    split = _split(cfg, panel)
    files: list[Path] = []

    columns = cfg.get_str_list("pca.columns", split.train.column_names)
    all_values = split.train.values()
    name_index = {n: i for i, n in enumerate(split.train.column_names)}
    for name in columns:
        if name not in name_index:
            raise ConfigError(f"pca column {name!r} not present in the panel")
    matrix = all_values[:, [name_index[n] for n in columns]]

    k = cfg.get_int("pca.components", 3)
    result = ns_factors.pca(matrix, k, standardize=cfg.get_bool("pca.standardize"))

    path = out_dir / "pca_explained.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        writer = csv.writer(fh)
        writer.writerow(["component", "explained"])
        for i, val in enumerate(result.explained, start=1):
            writer.writerow([i, repr(float(val))])
    files.append(path)

    path = out_dir / "pca_components.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        writer = csv.writer(fh)
        writer.writerow(["column", *[f"pc{i + 1}" for i in range(k)]])
        for row_name, row in zip(columns, result.components):
            writer.writerow([row_name, *[repr(float(v)) for v in row]])
    files.append(path)

    score_names = tuple(f"pc{i + 1}" for i in range(k))
    scores = FactorSeries(split.train.dates, score_names, result.scores)
    save_factor_series(scores, out_dir / "pca_scores.csv", header)
    files.append(out_dir / "pca_scores.csv")

    p = cfg.get_int("var.lags", 1)
    model = var_engine.fit_var(scores, p)
    var_engine.save_var_model(model, out_dir / "pca_var_model.csv", header)
    files.append(out_dir / "pca_var_model.csv")

    horizon = cfg.get_int("forecast.horizon", 56)
    forecast = var_engine.forecast_path(model, scores.values[-p:], horizon)
    var_engine.save_path_forecast(forecast, out_dir / "pca_factor_forecast.csv", header)
    files.append(out_dir / "pca_factor_forecast.csv")

    # map the score forecast back to the original columns (inverse transform)
    comp = result.components
    mean_cols = result.means + forecast.mean @ comp.T
    var_cols = np.stack([np.diag(comp @ forecast.cov[h] @ comp.T) for h in range(horizon)])
    if result.scales is not None:
        mean_cols = result.means + (forecast.mean @ comp.T) * result.scales
        var_cols = var_cols * result.scales**2
    sd_cols = np.sqrt(np.maximum(var_cols, 0.0))
    path = out_dir / "pca_column_forecast.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        writer = csv.writer(fh)
        writer.writerow(["horizon", "column", "mean", "sd"])
        for h in range(horizon):
            for j, name in enumerate(columns):
                writer.writerow(
                    [h + 1, name, repr(float(mean_cols[h, j])), repr(float(sd_cols[h, j]))]
                )
    files.append(path)

    files.append(_write_manifest(out_dir, files, header))
    return files


def cmd_fit_kalman(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    panel = _load_configured_panel(cfg)
    split = _split(cfg, panel)
    lam0 = _decay_rate(cfg)
    files: list[Path] = []

    init = state_space.init_from_two_step(split.train, lam0)
    options = state_space.MleOptions(
        max_evals=cfg.get_int("kalman.max_evals", 30_000),
        step_tol=cfg.get_float("kalman.step_tol", 1e-9),
    )
    fit = state_space.fit_mle(split.train, init, options)

    state_space.save_params(
        fit.params,
        out_dir / "kalman_params.txt",
        f"{header} converged={fit.converged} n_evals={fit.n_evals}",
    )
    files.append(out_dir / "kalman_params.txt")
    state_space.save_trace(fit, out_dir / "optimizer_trace.csv", header)
    files.append(out_dir / "optimizer_trace.csv")

    smoother = state_space.kalman_smoother(fit.filter, fit.params)
    factors = state_space.smoothed_factors(smoother, fit.params, split.train.dates)
    save_factor_series(factors, out_dir / "smoothed_factors.csv", header)
    files.append(out_dir / "smoothed_factors.csv")

    # forecasts from the estimated transition: f_{t+1} = mu + A(f_t - mu) + eta
    a = fit.params.a
    model = var_engine.VarModel(
        names=("L", "S", "C"),
        p=1,
        intercept=True,
        a0=(np.eye(3) - a) @ fit.params.mu,
        coeffs=(a,),
        sigma=fit.params.sigma_eta(),
        residuals=np.empty((0, 3)),
    )
    horizon = cfg.get_int("forecast.horizon", 56)
    forecast = var_engine.forecast_path(model, factors.values[-1:], horizon)
    var_engine.save_path_forecast(forecast, out_dir / "factor_forecast.csv", header)
    files.append(out_dir / "factor_forecast.csv")

    loadings = ns_loadings(fit.params.lam, split.train.maturities)
    yields_fc = reconstruct_yields(forecast, loadings)
    save_yield_forecast(yields_fc, out_dir / "yield_forecast.csv", header)
    files.append(out_dir / "yield_forecast.csv")

    files.append(_write_manifest(out_dir, files, header))
    return files


_PRIOR_NAMES = ("diffuse", "minnesota", "conjugate", "indep_niw", "ssvs", "ssvs_full")


def _build_prior(cfg: RunConfig, name: str):
    if name == "minnesota":
        return Minnesota(
            persistence=cfg.get_float("bvar.persistence", 0.95),
            d1=cfg.get_float("bvar.d1", 0.001),
            d2=cfg.get_float("bvar.d2", 0.001),
            d3=cfg.get_float("bvar.d3", 100.0),
        )
    if name == "conjugate":
        return NaturalConjugate(
            d1=cfg.get_float("bvar.d1", 0.03**2),
            d2=cfg.get_float("bvar.d2", 20.0**2),
            s_h0=cfg.get_float("bvar.s_h0"),
        )
    if name == "indep_niw":
        return IndepNIW(
            d1=cfg.get_float("bvar.d1", 0.03**2),
            d2=cfg.get_float("bvar.d2", 0.04**2),
            d3=cfg.get_float("bvar.d3", 20.0**2),
            s_h0=cfg.get_float("bvar.s_h0"),
        )
    if name in ("ssvs", "ssvs_full"):
        return Ssvs(
            c0=cfg.get_float("bvar.c0", 0.01),
            c1=cfg.get_float("bvar.c1", 20.0),
            p_prior=cfg.get_float("bvar.p_prior", 0.2),
            full=(name == "ssvs_full"),
            q_prior=cfg.get_float("bvar.q_prior", 0.2),
            tau0=cfg.get_float("bvar.tau0", 0.01),
            tau1=cfg.get_float("bvar.tau1", 10.0),
            s_h0=cfg.get_float("bvar.s_h0"),
        )
    raise ConfigError(f"unknown prior {name!r}; choose one of {_PRIOR_NAMES}")


def cmd_bvar(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    panel = _load_configured_panel(cfg)
    split = _split(cfg, panel)
    lam = _decay_rate(cfg)
    files: list[Path] = []

    prior_name = cfg.get("bvar.prior", "minnesota")
    if prior_name not in _PRIOR_NAMES:
        raise ConfigError(f"unknown prior {prior_name!r}; choose one of {_PRIOR_NAMES}")
    factors = _factor_series(cfg, split.train, lam)

    lags_raw = cfg.get("bvar.lags", "aic" if prior_name == "diffuse" else "13")
    if lags_raw == "aic":
        p = var_engine.select_lag_aic(factors, cfg.get_int("bvar.max_lags", 13))
    else:
        try:
            p = int(lags_raw)
        except ValueError:
            raise ConfigError(f"bvar.lags must be an integer or 'aic', got {lags_raw!r}")
    intercept = prior_name not in ("ssvs", "ssvs_full")
    design = build_design(factors, p, intercept=intercept)

    n_total = cfg.get_int("bvar.total", 11_000)
    n_burn = cfg.get_int("bvar.burn", 1_000)
    n_draws = cfg.get_int("bvar.draws", 2_000)
    if prior_name == "diffuse":
        draws = diffuse_posterior(design, n_draws=n_draws, seed=seed)
    elif prior_name == "minnesota":
        draws = minnesota_posterior(design, _build_prior(cfg, prior_name), n_draws=n_draws, seed=seed)
    elif prior_name == "conjugate":
        draws = conjugate_posterior(design, _build_prior(cfg, prior_name), n_draws=n_draws, seed=seed)
    elif prior_name == "indep_niw":
        draws = gibbs_indep_niw(design, _build_prior(cfg, prior_name), n_total, n_burn, seed)
    else:
        draws = gibbs_ssvs(design, _build_prior(cfg, prior_name), n_total, n_burn, seed)

    save_draws(draws, out_dir / "draws.npz")
    files.append(out_dir / "draws.npz")

    if draws.gamma is not None:
        path = out_dir / "inclusion_probabilities.csv"
        probs = draws.inclusion_probabilities()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {header}\n")
            writer = csv.writer(fh)
            writer.writerow(["coefficient", "inclusion_probability"])
            for i, prob in enumerate(probs):
                writer.writerow([i, repr(float(prob))])
        files.append(path)

    horizons = cfg.get_int_list("horizons", DEFAULT_HORIZONS)
    h_max = min(max(horizons), split.test.n_dates) if split.test.n_dates else max(horizons)
    realized = None
    if split.test.n_dates > 0:
        test_factors = fit_cross_section(split.test, lam).factors.values[0]
        realized = test_factors
        macro_names = cfg.get_str_list("bvar.macro")
        if macro_names:
            extra = [
                split.test.macro[0, split.test.macro_names.index(n)]
                for n in macro_names
            ]
            realized = np.concatenate([test_factors, extra])
    pred = predict(draws, design, h_max, realized=realized, seed=seed)
    save_predictive(pred, out_dir / "predictive.csv", header)
    files.append(out_dir / "predictive.csv")

    loadings = ns_loadings(lam, split.train.maturities)
    yield_fc = reconstruct_yields(pred, loadings)
    save_yield_forecast(yield_fc, out_dir / "yield_predictive.csv", header)
    files.append(out_dir / "yield_predictive.csv")

    files.append(_write_manifest(out_dir, files, header))
    return files


def cmd_irf(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    draws_path = cfg.get_path("irf.draws")
    if draws_path is None:
        raise ConfigError("config must set irf.draws (path to a draws store)")
    if not draws_path.exists():
        raise ConfigError(f"draws store does not exist: {draws_path}")
    horizon = cfg.get_int("irf.horizon", 24)
    if horizon < 1:
        raise ConfigError("irf.horizon must be >= 1")
    draws = load_draws(draws_path)
    result = structural.irf_recursive(draws, horizon)
    path = out_dir / "irf.csv"
    structural.save_irf(result, path, header)
    files = [path, _write_manifest(out_dir, [path], header)]
    return files


_SIGN_BY_KEYWORD = (("tcu", -1), ("pce", -1), ("unrate", 1), ("ted", 1), ("effr", 1))


def _default_signs(column_names, n_yields: int) -> tuple[int, ...]:
    signs = []
    for i, name in enumerate(column_names):
        if i < n_yields:
            signs.append(1)
            continue
        sign = 0
        for keyword, value in _SIGN_BY_KEYWORD:
            if keyword in name.lower():
                sign = value
                break
        signs.append(sign)
    return tuple(signs)


def cmd_sign_irf(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    panel = _load_configured_panel(cfg)
    split = _split(cfg, panel)
    files: list[Path] = []

    train = split.train
    values = train.values()
    names = train.column_names
    series = FactorSeries(train.dates, names, values)
    scales = fit_ar1_residual_scales(series)
    sigmas = np.sqrt(scales)
    if np.any(sigmas <= 0):
        raise NumericError("zero AR residual scale; cannot build dummy observations")
    p = cfg.get_int("sign.lags", 2)
    dummies = structural.build_dummy_obs(
        sigmas,
        values.mean(axis=0),
        p=p,
        tightness=cfg.get_float("sign.f", 0.95),
        intercept_scale=cfg.get_float("sign.c", 0.95),
        theta=cfg.get_float("sign.theta"),
    )
    draws = structural.gibbs_dummy_bvar(
        values,
        dummies,
        n_total=cfg.get_int("sign.total", 20_000),
        n_burn=cfg.get_int("sign.burn", 10_000),
        seed=seed,
        names=names,
    )
    if cfg.get_bool("sign.save_draws"):
        save_draws(draws, out_dir / "draws.npz")
        files.append(out_dir / "draws.npz")

    shock_name = cfg.get("sign.shock")
    if shock_name is not None:
        if shock_name not in names:
            raise ConfigError(f"sign.shock column {shock_name!r} not in the panel")
        shock = names.index(shock_name)
    else:
        shock = len(names) - 1
        for i, name in enumerate(names):
            if "effr" in name.lower():
                shock = i
    sign_tokens = cfg.get_str_list("sign.signs")
    if sign_tokens:
        table = {"+": 1, "-": -1, "0": 0}
        try:
            signs = tuple(table[tok] for tok in sign_tokens)
        except KeyError:
            raise ConfigError("sign.signs tokens must be '+', '-' or '0'")
        if len(signs) != len(names):
            raise ConfigError(
                f"sign.signs has {len(signs)} entries for {len(names)} variables"
            )
    else:
        signs = _default_signs(names, len(train.maturities))
    restriction = structural.SignRestriction(shock, signs)

    result = structural.sign_restricted_irf(
        draws,
        restriction,
        horizon=cfg.get_int("irf.horizon", 24),
        max_tries=cfg.get_int("sign.max_tries", 1000),
        seed=seed,
    )
    path = out_dir / "sign_irf.csv"
    structural.save_irf(result, path, header)
    files.append(path)
    report = out_dir / "acceptance_report.txt"
    structural.save_acceptance_report(result, report)
    files.append(report)
    files.append(_write_manifest(out_dir, files, header))
    return files


def cmd_evaluate(cfg: RunConfig, seed: int) -> list[Path]:
    out_dir = _run_dir(cfg)
    header = _provenance(cfg, seed)
    panel = _load_configured_panel(cfg)
    split = _split(cfg, panel)

    methods = cfg.subsection("evaluate.forecast")
    if not methods:
        raise ConfigError("config must set at least one evaluate.forecast.<method> key")
    forecasts = {}
    for method, rel_path in sorted(methods.items()):
        path = Path(rel_path)
        if not path.is_absolute():
            path = cfg.base_dir / path
        if not path.exists():
            raise ConfigError(f"forecast file does not exist: {path}")
        fc = load_yield_forecast(path)
        panel_mats = tuple(float(m) for m in split.test.maturities)
        if tuple(fc.maturities) != panel_mats:
            raise ConfigError(
                f"forecast {method!r} maturities {fc.maturities} do not match "
                f"the panel {panel_mats}"
            )
        forecasts[method] = fc.mean

    horizons = cfg.get_int_list("horizons", DEFAULT_HORIZONS)
    report = evaluation.evaluate_horizons(
        forecasts,
        split.test,
        horizons,
        path_average=cfg.get_bool("evaluate.path_average"),
        metadata={
            "config_hash": cfg.config_hash(),
            "seed": str(seed),
            "train_end": split.train.dates[-1],
            "test_start": split.test.dates[0],
        },
    )
    path = out_dir / "msfe.csv"
    evaluation.save_eval_report(report, path, header)
    return [path, _write_manifest(out_dir, [path], header)]


_COMMANDS = {
    "describe": cmd_describe,
    "fit-two-step": cmd_fit_two_step,
    "fit-pca": cmd_fit_pca,
    "fit-kalman": cmd_fit_kalman,
    "bvar": cmd_bvar,
    "irf": cmd_irf,
    "sign-irf": cmd_sign_irf,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnsvar",
        description="Yield-curve factor extraction and VAR/BVAR forecasting toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="flat key-value config file")
        cmd.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        seed = args.seed if args.seed is not None else cfg.get_int("seed", 0)
        _COMMANDS[args.command](cfg, seed)
    except (ConfigError, DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
