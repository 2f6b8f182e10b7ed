"""Bayesian VAR estimation: stacked designs, prior families, posterior
samplers, predictive distributions."""

from .design import VarDesign, build_design, fit_ar1_residual_scales
from .priors import Diffuse, IndepNIW, Minnesota, NaturalConjugate, Ssvs
from .posteriors import (
    PosteriorDraws,
    conjugate_posterior,
    diffuse_posterior,
    gibbs_indep_niw,
    gibbs_ssvs,
    load_draws,
    minnesota_posterior,
    save_draws,
)
from .predict import PredictiveDistribution, YieldForecast, predict, reconstruct_yields

__all__ = [
    "VarDesign",
    "build_design",
    "fit_ar1_residual_scales",
    "Diffuse",
    "Minnesota",
    "NaturalConjugate",
    "IndepNIW",
    "Ssvs",
    "PosteriorDraws",
    "minnesota_posterior",
    "conjugate_posterior",
    "diffuse_posterior",
    "gibbs_indep_niw",
    "gibbs_ssvs",
    "save_draws",
    "load_draws",
    "predict",
    "PredictiveDistribution",
    "YieldForecast",
    "reconstruct_yields",
]
