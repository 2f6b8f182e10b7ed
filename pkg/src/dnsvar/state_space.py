"""One-step state-space estimation: Kalman filter and smoother on the
demeaned factor system, exact Gaussian log-likelihood, and quasi-Newton
maximum likelihood over the packed free parameters.

State: X_t = A X_{t-1} + η_t with η ~ N(0, ZZ'); measurement:
Y_t - Λμ = Λ X_t + ε_t with ε ~ N(0, diag(w²)), Λ the Nelson-Siegel
loading matrix of the decay rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_discrete_lyapunov
from scipy.optimize import minimize

from .data_io import YieldPanel
from .errors import NumericError
from .linalg import chol_lower, spectral_radius, symmetrize
from .ns_factors import FactorSeries, fit_cross_section, ns_loadings
from .var_engine import fit_var

_N_STATE = 3
_STATE_PARAMS = 9 + 3 + 1 + 6  # A, mu, lambda, lower Cholesky of state noise


@dataclass(frozen=True)
class SsmParams:
    """Free parameters of the one-step model.

    a: 3x3 transition; mu: factor means; lam: decay rate; z: lower
    Cholesky factor of the state innovation covariance; w: per-maturity
    measurement standard deviations. 9 + 3 + 1 + 6 + M free parameters
    (29 for the ten-maturity panel).
    """

    a: np.ndarray
    mu: np.ndarray
    lam: float
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        z = np.asarray(self.z, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if a.shape != (_N_STATE, _N_STATE) or mu.shape != (_N_STATE,):
            raise ValueError("transition matrix must be 3x3 and mu length 3")
        if z.shape != (_N_STATE, _N_STATE):
            raise ValueError("z must be 3x3")
        if not np.allclose(z, np.tril(z)):
            raise ValueError("z must be lower triangular")
        if np.any(np.diag(z) <= 0):
            raise ValueError("z must have a positive diagonal")
        if self.lam <= 0:
            raise ValueError("decay rate must be positive")
        if w.ndim != 1 or np.any(w <= 0):
            raise ValueError("w must be a vector of positive standard deviations")
        for name, val in (("a", a), ("mu", mu), ("z", z), ("w", w)):
            object.__setattr__(self, name, val)
            val.flags.writeable = False

    @property
    def n_free(self) -> int:
        return _STATE_PARAMS + self.w.size

    def sigma_eta(self) -> np.ndarray:
        return self.z @ self.z.T

    def sigma_eps(self) -> np.ndarray:
        return np.diag(self.w**2)


@dataclass(frozen=True)
class FilterOutput:
    filtered_state: np.ndarray    # T x 3, demeaned states X_{t|t}
    filtered_cov: np.ndarray      # T x 3 x 3
    pred_state: np.ndarray        # X_{t|t-1}
    pred_cov: np.ndarray
    innovations: np.ndarray       # T x M forecast errors
    innovation_cov: np.ndarray    # T x M x M
    loglik: float
    init_state: np.ndarray
    init_cov: np.ndarray


@dataclass(frozen=True)
class SmootherOutput:
    smoothed_state: np.ndarray    # T x 3, demeaned X_{t|T}
    smoothed_cov: np.ndarray


@dataclass
class MleOptions:
    max_evals: int = 30_000
    step_tol: float = 1e-9        # relative step size for convergence
    fd_step: float = 1e-6         # relative finite-difference step
    gtol: float = 1e-5


@dataclass(frozen=True)
class MleFit:
    params: SsmParams
    filter: FilterOutput
    converged: bool
    n_evals: int
    trace: tuple[tuple[int, float, float], ...]  # (evals, objective, grad inf-norm)


def default_init_cov(params: SsmParams) -> np.ndarray:
    """Unconditional state covariance when stationary, else an inflated prior."""
    if spectral_radius(params.a) < 1.0:
        return symmetrize(solve_discrete_lyapunov(params.a, params.sigma_eta()))
    return 10.0 * np.eye(_N_STATE)


def kalman_filter(
    params: SsmParams,
    panel: YieldPanel,
    init_state: np.ndarray | None = None,
    init_cov: np.ndarray | None = None,
) -> FilterOutput:
    """Predict/update recursions on intercept-adjusted yields Y_t - Λμ.

    Covariance updates use the Joseph form and are re-symmetrized every
    step. Raises NumericError naming t when an innovation covariance is
    not positive definite.
    """
    m = len(panel.maturities)
    if params.w.size != m:
        raise ValueError(
            f"panel has {m} maturities but params carry {params.w.size} noise sds"
        )
    lam_mat = ns_loadings(params.lam, panel.maturities).matrix
    y1 = panel.yields - lam_mat @ params.mu

    x0 = np.zeros(_N_STATE) if init_state is None else np.asarray(init_state, dtype=float)
    p0 = default_init_cov(params) if init_cov is None else np.asarray(init_cov, dtype=float)
    if not np.allclose(p0, p0.T, atol=1e-8):
        raise ValueError("init_cov must be symmetric")
    x, p = x0, p0

    a = params.a
    sig_eta = params.sigma_eta()
    sig_eps = params.sigma_eps()
    t_len = panel.n_dates

    filtered_state = np.empty((t_len, _N_STATE))
    filtered_cov = np.empty((t_len, _N_STATE, _N_STATE))
    pred_state = np.empty((t_len, _N_STATE))
    pred_cov = np.empty((t_len, _N_STATE, _N_STATE))
    innovations = np.empty((t_len, m))
    innovation_cov = np.empty((t_len, m, m))
    loglik = 0.0
    log2pi = np.log(2.0 * np.pi)

    for t in range(t_len):
        xp = a @ x
        pp = symmetrize(a @ p @ a.T + sig_eta)
        err = y1[t] - lam_mat @ xp
        s = symmetrize(lam_mat @ pp @ lam_mat.T + sig_eps)
        try:
            s_fac = cho_factor(s, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"innovation covariance not PD at t={t}") from exc
        gain = cho_solve(s_fac, lam_mat @ pp).T
        x = xp + gain @ err
        i_kl = np.eye(_N_STATE) - gain @ lam_mat
        p = symmetrize(i_kl @ pp @ i_kl.T + gain @ sig_eps @ gain.T)

        logdet = 2.0 * np.log(np.diag(s_fac[0])).sum()
        loglik += -0.5 * (m * log2pi + logdet + err @ cho_solve(s_fac, err))

        pred_state[t], pred_cov[t] = xp, pp
        filtered_state[t], filtered_cov[t] = x, p
        innovations[t], innovation_cov[t] = err, s

    return FilterOutput(
        filtered_state,
        filtered_cov,
        pred_state,
        pred_cov,
        innovations,
        innovation_cov,
        float(loglik),
        x0,
        p0,
    )


def kalman_smoother(filt: FilterOutput, params: SsmParams) -> SmootherOutput:
    """Fixed-interval backward recursion; at t=T the smoothed state equals
    the filtered state exactly."""
    t_len = filt.filtered_state.shape[0]
    a = params.a
    xs = np.empty_like(filt.filtered_state)
    ps = np.empty_like(filt.filtered_cov)
    xs[-1] = filt.filtered_state[-1]
    ps[-1] = filt.filtered_cov[-1]
    for t in range(t_len - 2, -1, -1):
        pp_next = filt.pred_cov[t + 1]
        try:
            gain = np.linalg.solve(pp_next, a @ filt.filtered_cov[t]).T
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular predicted covariance at t={t + 1}") from exc
        xs[t] = filt.filtered_state[t] + gain @ (xs[t + 1] - filt.pred_state[t + 1])
        ps[t] = symmetrize(
            filt.filtered_cov[t] + gain @ (ps[t + 1] - pp_next) @ gain.T
        )
    return SmootherOutput(xs, ps)


def smoothed_factors(smoother: SmootherOutput, params: SsmParams, dates) -> FactorSeries:
    """Re-add the estimated mean to the demeaned smoothed states."""
    return FactorSeries(tuple(dates), ("L", "S", "C"), smoother.smoothed_state + params.mu)


def pack(params: SsmParams) -> np.ndarray:
    """Bijective map to the unconstrained optimizer space.

    λ, the diagonal of Z and all of w are log-transformed so positivity is
    structural rather than a constraint.
    """
    z = params.z
    z_part = [
        np.log(z[0, 0]),
        z[1, 0],
        np.log(z[1, 1]),
        z[2, 0],
        z[2, 1],
        np.log(z[2, 2]),
    ]
    return np.concatenate(
        [
            params.a.ravel(),
            params.mu,
            [np.log(params.lam)],
            z_part,
            np.log(params.w),
        ]
    )


def unpack(vector: np.ndarray, n_maturities: int = 10) -> SsmParams:
    vector = np.asarray(vector, dtype=float)
    expected = _STATE_PARAMS + n_maturities
    if vector.shape != (expected,):
        raise ValueError(
            f"packed vector must have length {expected}, got {vector.shape}"
        )
    a = vector[:9].reshape(3, 3)
    mu = vector[9:12]
    lam = float(np.exp(vector[12]))
    zv = vector[13:19]
    z = np.zeros((3, 3))
    z[0, 0] = np.exp(zv[0])
    z[1, 0] = zv[1]
    z[1, 1] = np.exp(zv[2])
    z[2, 0] = zv[3]
    z[2, 1] = zv[4]
    z[2, 2] = np.exp(zv[5])
    w = np.exp(vector[19:])
    return SsmParams(a, mu, lam, z, w)


class _EvalBudgetExceeded(Exception):
    pass


class _Objective:
    """Negative log-likelihood with an evaluation counter and best-point memo."""

    def __init__(self, panel: YieldPanel, n_maturities: int, max_evals: int):
        self.panel = panel
        self.n_maturities = n_maturities
        self.max_evals = max_evals
        self.n_evals = 0
        self.best_x: np.ndarray | None = None
        self.best_f = np.inf

    def __call__(self, x: np.ndarray) -> float:
        if self.n_evals >= self.max_evals:
            raise _EvalBudgetExceeded
        self.n_evals += 1
        try:
            value = -kalman_filter(unpack(x, self.n_maturities), self.panel).loglik
        except (NumericError, ValueError, FloatingPointError):
            return 1e300
        if not np.isfinite(value):
            return 1e300
        if value < self.best_f:
            self.best_f = value
            self.best_x = x.copy()
        return value


def _central_gradient(fun, x: np.ndarray, rel_step: float) -> np.ndarray:
    grad = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (fun(xp) - fun(xm)) / (2.0 * h)
    return grad


def fit_mle(
    panel: YieldPanel,
    init: SsmParams,
    options: MleOptions | None = None,
) -> MleFit:
    """Quasi-Newton (BFGS) maximization of the filter log-likelihood.

    Gradients come from central finite differences. Stops on the BFGS
    gradient test, on relative steps below `step_tol`, or on exhausting the
    evaluation budget, in which case the best visited point is returned
    flagged non-converged.
    """
    opts = options or MleOptions()
    n_mat = len(panel.maturities)
    objective = _Objective(panel, n_mat, opts.max_evals)
    x0 = pack(init)

    f0 = objective(x0)
    if not np.isfinite(f0) or f0 >= 1e300:
        raise ValueError("log-likelihood is not finite at the initial parameters")

    trace: list[tuple[int, float, float]] = []
    state = {"last_x": x0.copy(), "small_step": False, "last_grad": np.inf}

    def jac(x: np.ndarray) -> np.ndarray:
        g = _central_gradient(objective, x, opts.fd_step)
        state["last_grad"] = float(np.abs(g).max())
        return g

    def callback(xk: np.ndarray) -> None:
        fk = objective(xk)
        trace.append((objective.n_evals, fk, state["last_grad"]))
        step = np.linalg.norm(xk - state["last_x"])
        if step < opts.step_tol * max(np.linalg.norm(xk), 1.0):
            state["small_step"] = True
            raise StopIteration
        state["last_x"] = xk.copy()

    converged = False
    try:
        result = minimize(
            objective,
            x0,
            jac=jac,
            method="BFGS",
            callback=callback,
            options={"gtol": opts.gtol, "maxiter": 10**9},
        )
        converged = bool(result.success) or state["small_step"]
    except _EvalBudgetExceeded:
        converged = False
    except StopIteration:
        converged = True

    best_x = objective.best_x if objective.best_x is not None else x0
    params = unpack(best_x, n_mat)
    filt = kalman_filter(params, panel)
    return MleFit(params, filt, converged, objective.n_evals, tuple(trace))


def init_from_two_step(
    panel: YieldPanel, lambda0: float, noise_floor: float = 1e-4
) -> SsmParams:
    """Starting point from the two-step fit: cross-sectional factors, a
    VAR(1) on them, and residual scales for the noise parameters."""
    cross = fit_cross_section(panel, lambda0)
    var1 = fit_var(cross.factors, p=1, intercept=True)
    mu = cross.factors.values.mean(axis=0)
    sigma = var1.sigma
    try:
        z = np.linalg.cholesky(symmetrize(sigma))
    except np.linalg.LinAlgError:
        z = np.diag(np.sqrt(np.clip(np.diag(sigma), 0.0, None)))
    di = np.arange(_N_STATE)
    z[di, di] = np.maximum(z[di, di], noise_floor)
    w = np.maximum(cross.residuals.std(axis=0, ddof=1), noise_floor)
    return SsmParams(var1.coeffs[0], mu, lambda0, np.tril(z), w)


def save_params(params: SsmParams, path: str | Path, header_comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(f"lambda = {params.lam!r}\n")
        for i in range(3):
            fh.write(f"mu.{i} = {params.mu[i]!r}\n")
        for i in range(3):
            for j in range(3):
                fh.write(f"a.{i}{j} = {params.a[i, j]!r}\n")
        for i in range(3):
            for j in range(i + 1):
                fh.write(f"z.{i}{j} = {params.z[i, j]!r}\n")
        for i, wi in enumerate(params.w):
            fh.write(f"w.{i} = {wi!r}\n")


def load_params(path: str | Path) -> SsmParams:
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = float(val.strip())
    a = np.array([[values[f"a.{i}{j}"] for j in range(3)] for i in range(3)])
    mu = np.array([values[f"mu.{i}"] for i in range(3)])
    z = np.zeros((3, 3))
    for i in range(3):
        for j in range(i + 1):
            z[i, j] = values[f"z.{i}{j}"]
    w = np.array([values[f"w.{i}"] for i in range(len([k for k in values if k.startswith('w.')]))])
    return SsmParams(a, mu, values["lambda"], z, w)


def save_trace(fit: MleFit, path: str | Path, header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["n_evals", "objective", "grad_inf_norm"])
        for n_evals, fx, gnorm in fit.trace:
            writer.writerow([n_evals, repr(float(fx)), repr(float(gnorm))])
        writer.writerow(["final", repr(float(-fit.filter.loglik)), ""])
