"""Stacked VAR data in the two equivalent representations.

Wide form: F = GΦ + U with F (T_eff x k) and G rows [1, f'_{t-1}, ..., f'_{t-p}].
Long form: f = ΩA + η with f = vec(F') and Ω stacking I_k ⊗ g_t' blocks;
A = vec(Φ) stacks Φ column by column (equation-major).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ns_factors import FactorSeries
from ..var_engine import lagged_design


@dataclass(frozen=True)
class VarDesign:
    names: tuple[str, ...]
    k: int
    p: int
    intercept: bool
    data: np.ndarray      # full T x k series the design was built from
    f: np.ndarray         # T_eff x k
    g: np.ndarray         # T_eff x r

    def __post_init__(self):
        for name in ("data", "f", "g"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            arr.flags.writeable = False
        if self.g.shape[1] != self.r:
            raise ValueError(f"G has {self.g.shape[1]} columns, expected r={self.r}")
        if self.f.shape != (self.g.shape[0], self.k):
            raise ValueError("F and G row counts disagree")

    @property
    def r(self) -> int:
        return self.k * self.p + (1 if self.intercept else 0)

    @property
    def t_eff(self) -> int:
        return self.f.shape[0]

    @property
    def n_coef(self) -> int:
        return self.k * self.r

    def f_long(self) -> np.ndarray:
        """f = [f_1', ..., f_T']' = vec(F')."""
        return self.f.ravel()

    def omega(self) -> np.ndarray:
        """Explicit (T_eff*k x k*r) long-form regressor matrix."""
        eye = np.eye(self.k)
        return np.vstack([np.kron(eye, row[None, :]) for row in self.g])

    def history(self) -> np.ndarray:
        """Last p observations (oldest..newest), the forecast origin."""
        return self.data[-self.p :]

    @classmethod
    def from_arrays(cls, f, g, k, p, intercept, names=None) -> "VarDesign":
        """Assemble a design from raw stacked arrays (tests, edge cases)."""
        f = np.asarray(f, dtype=float).reshape(-1, k)
        names = tuple(names) if names else tuple(f"v{i}" for i in range(k))
        return cls(names, k, p, intercept, f, f, np.asarray(g, dtype=float))


def build_design(data: FactorSeries, p: int, intercept: bool = True) -> VarDesign:
    """Both stacked forms for a VAR(p) on the series."""
    if p < 1:
        raise ValueError("lag order must be >= 1")
    t = data.values.shape[0]
    if t <= p:
        raise ValueError(f"need more than p={p} observations, got {t}")
    f, g = lagged_design(data.values, p, intercept)
    return VarDesign(data.names, data.k, p, intercept, data.values, f, g)


def fit_ar1_residual_scales(data: FactorSeries) -> np.ndarray:
    """Residual variances of per-variable AR(1)-with-intercept fits.

    These set the scale-matching entries of the Minnesota-style prior
    variances and the inverse-Wishart prior scales.
    """
    values = data.values
    t = values.shape[0]
    if t < 3:
        raise ValueError("need at least 3 observations for AR(1) scales")
    out = np.empty(data.k)
    for i in range(data.k):
        y = values[1:, i]
        x = np.column_stack([np.ones(t - 1), values[:-1, i]])
        beta, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
        resid = y - x @ beta
        dof = max(t - 1 - 2, 1)
        out[i] = resid @ resid / dof
    return out


def phi_to_coeffs(phi: np.ndarray, k: int, p: int, intercept: bool):
    """Split a (r x k) coefficient matrix into (a0, [A_1..A_p])."""
    phi = np.asarray(phi, dtype=float)
    a0 = phi[0] if intercept else np.zeros(k)
    rows = phi[1:] if intercept else phi
    coeffs = [rows[lag * k : (lag + 1) * k].T for lag in range(p)]
    return a0, coeffs
