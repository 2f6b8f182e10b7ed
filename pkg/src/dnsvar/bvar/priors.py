"""Prior families for the Bayesian VARs and their variance constructions.

Hyperparameter defaults follow the desk conventions used throughout:
Minnesota d1=d2=0.001, d3=100 with persistence 0.95; natural conjugate
d1=0.03², d2=20²; independent normal-inverse-Wishart d1=0.03², d2=0.04²,
d3=20²; SSVS semi-automatic scales c0=0.01, c1=20 with inclusion prior 0.2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .design import VarDesign


@dataclass(frozen=True)
class Diffuse:
    """Noninformative limit; posterior from least squares quantities only."""


@dataclass(frozen=True)
class Minnesota:
    persistence: float = 0.95
    d1: float = 0.001
    d2: float = 0.001
    d3: float = 100.0

    def __post_init__(self):
        if min(self.d1, self.d2, self.d3) <= 0:
            raise ConfigError("Minnesota variance hyperparameters must be positive")


@dataclass(frozen=True)
class NaturalConjugate:
    d1: float = 0.03**2
    d2: float = 20.0**2
    s_h0: float | None = None       # defaults to k + kr
    phi0: np.ndarray | None = None  # defaults to zeros
    s_c0: np.ndarray | None = None  # defaults to diag(AR(1) residual variances)

    def __post_init__(self):
        if min(self.d1, self.d2) <= 0:
            raise ConfigError("conjugate variance hyperparameters must be positive")


@dataclass(frozen=True)
class IndepNIW:
    d1: float = 0.03**2
    d2: float = 0.04**2
    d3: float = 20.0**2
    s_h0: float | None = None
    a0: np.ndarray | None = None
    s_c0: np.ndarray | None = None

    def __post_init__(self):
        if min(self.d1, self.d2, self.d3) <= 0:
            raise ConfigError("IndepNIW variance hyperparameters must be positive")


@dataclass(frozen=True)
class Ssvs:
    c0: float = 0.01
    c1: float = 20.0
    p_prior: float = 0.2
    full: bool = False
    q_prior: float = 0.2
    tau0: float = 0.01
    tau1: float = 10.0
    gamma_shape: float = 0.01  # prior on squared diagonals of the covariance factor
    gamma_rate: float = 0.01
    s_h0: float | None = None
    s_c0: np.ndarray | None = None  # identity by default

    def __post_init__(self):
        if min(self.c0, self.c1, self.tau0, self.tau1) <= 0:
            raise ConfigError("SSVS scale hyperparameters must be positive")
        if not (0 < self.p_prior < 1 and 0 < self.q_prior < 1):
            raise ConfigError("SSVS inclusion probabilities must lie in (0, 1)")
        if min(self.gamma_shape, self.gamma_rate) <= 0:
            raise ConfigError("Gamma hyperparameters must be positive")


PriorSpec = Diffuse | Minnesota | NaturalConjugate | IndepNIW | Ssvs


def default_dof(design: VarDesign, s_h0: float | None) -> float:
    """Prior degrees of freedom; k + kr unless set explicitly."""
    value = float(s_h0) if s_h0 is not None else float(design.k + design.n_coef)
    if value <= design.k - 1:
        raise ConfigError(f"prior degrees of freedom must exceed k-1={design.k - 1}")
    return value


def coefficient_kind(design: VarDesign, index: int) -> tuple[int, int, int]:
    """Decode a stacked-coefficient index into (equation, lag, variable).

    lag 0 with variable -1 denotes the intercept. The stacked vector is
    equation-major: A = vec(Φ).
    """
    r = design.r
    eq, row = divmod(index, r)
    if design.intercept:
        if row == 0:
            return eq, 0, -1
        row -= 1
    lag, var = divmod(row, design.k)
    return eq, lag + 1, var


def minnesota_mean(design: VarDesign, persistence: float) -> np.ndarray:
    """Prior coefficient mean: `persistence` on own first lags, zero elsewhere."""
    mean = np.zeros(design.n_coef)
    for idx in range(design.n_coef):
        eq, lag, var = coefficient_kind(design, idx)
        if lag == 1 and var == eq:
            mean[idx] = persistence
    return mean


def minnesota_variances(design: VarDesign, prior, scales: np.ndarray) -> np.ndarray:
    """Diagonal of the Minnesota-style coefficient prior covariance.

    Own lag l: d1/l²; lag l of another variable j in equation i:
    d2 σ²_ii/(l² σ²_jj); intercept: d3 σ²_ii. Used by both the Minnesota
    prior (Σ_mp) and the independent normal-inverse-Wishart prior (V_A).
    """
    var = np.empty(design.n_coef)
    for idx in range(design.n_coef):
        eq, lag, j = coefficient_kind(design, idx)
        if lag == 0:
            var[idx] = prior.d3 * scales[eq]
        elif j == eq:
            var[idx] = prior.d1 / lag**2
        else:
            var[idx] = prior.d2 * scales[eq] / (lag**2 * scales[j])
    return var


def conjugate_phi_variances(design: VarDesign, prior: NaturalConjugate, scales: np.ndarray) -> np.ndarray:
    """Diagonal of Σ_Φ: d1/(l² σ²_jj) for lag l of variable j, d2 for constants."""
    var = np.empty(design.r)
    pos = 0
    if design.intercept:
        var[0] = prior.d2
        pos = 1
    for lag in range(1, design.p + 1):
        for j in range(design.k):
            var[pos] = prior.d1 / (lag**2 * scales[j])
            pos += 1
    return var
