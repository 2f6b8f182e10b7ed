"""Structural analysis on posterior draws: recursive (Cholesky) impulse
responses, the dummy-observation BVAR, and sign-restriction identification
via QR rotations.

Index conventions, fixed here once: the reduced-form errors satisfy
e_t = Ω'ε_t with Σ_e = Ω'Ω, so row s of a candidate Ω is the impact
response of all variables to structural shock s. Responses are reported as
response[h, i, j] = reaction of variable i at horizon h to shock j.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericError
from .linalg import chol_lower, companion_matrix, sample_inverse_wishart, symmetrize
from .bvar.design import phi_to_coeffs
from .bvar.posteriors import PosteriorDraws


@dataclass(frozen=True)
class IrfResult:
    response_names: tuple[str, ...]
    shock_names: tuple[str, ...]
    horizons: np.ndarray            # 0..H, impact at 0
    responses: np.ndarray           # n_kept x (H+1) x n_response x n_shock
    median: np.ndarray              # (H+1) x n_response x n_shock
    lower: np.ndarray
    upper: np.ndarray
    levels: tuple[float, float]
    n_skipped: int = 0              # non-PD covariance draws (recursive scheme)
    n_dropped: int = 0              # draws without an accepted rotation
    acceptance_rate: float | None = None


@dataclass(frozen=True)
class DummyObs:
    """Prior dummy blocks: coefficient/covariance/intercept rows plus
    sum-of-coefficients rows, with their hyperparameters."""

    y_d1: np.ndarray
    x_d1: np.ndarray
    y_d2: np.ndarray
    x_d2: np.ndarray
    p: int
    tightness: float        # f
    intercept_scale: float  # c
    theta: float

    @property
    def y_d(self) -> np.ndarray:
        return np.vstack([self.y_d1, self.y_d2])

    @property
    def x_d(self) -> np.ndarray:
        return np.vstack([self.x_d1, self.x_d2])

    @property
    def t_d(self) -> int:
        return self.y_d.shape[0]


@dataclass(frozen=True)
class SignRestriction:
    """Per-variable sign constraints on one structural shock's responses.

    signs: +1 (response must be positive), -1 (negative), 0 (unrestricted);
    applied at the listed horizons (impact only by default). An
    all-unrestricted vector is allowed and accepts every rotation.
    """

    shock: int
    signs: tuple[int, ...]
    horizons: tuple[int, ...] = (0,)

    def __post_init__(self):
        if any(s not in (-1, 0, 1) for s in self.signs):
            raise ValueError("signs must be -1, 0 or +1")
        if self.shock < 0 or self.shock >= len(self.signs):
            raise ValueError("shock index out of range")
        if any(h < 0 for h in self.horizons):
            raise ValueError("restriction horizons must be >= 0")


def _reduced_form_responses(phi, k, p, intercept, horizon):
    """Ψ_h = top-left k x k block of the companion matrix power, h = 0..H."""
    _, coeffs = phi_to_coeffs(phi, k, p, intercept)
    comp = companion_matrix(coeffs)
    out = np.empty((horizon + 1, k, k))
    power = np.eye(k * p)
    for h in range(horizon + 1):
        out[h] = power[:k, :k]
        power = comp @ power
    return out


def irf_recursive(
    draws: PosteriorDraws,
    horizon: int = 24,
    levels: tuple[float, float] = (0.05, 0.95),
) -> IrfResult:
    """Orthogonalized responses under the recursive ordering.

    Per draw the impact matrix is the lower Cholesky factor of Σ; the
    response at horizon h is Ψ_h Z. Non-PD covariance draws are skipped and
    counted.
    """
    if horizon < 1:
        raise ValueError("IRF horizon must be >= 1")
    k, p = draws.k, draws.p
    kept = []
    skipped = 0
    for s in range(draws.n_draws):
        try:
            z = np.linalg.cholesky(symmetrize(draws.sigma[s]))
        except np.linalg.LinAlgError:
            skipped += 1
            continue
        psi = _reduced_form_responses(draws.phi[s], k, p, draws.intercept, horizon)
        kept.append(psi @ z)
    if not kept:
        raise NumericError(f"no usable draws for IRFs ({skipped} skipped)")
    responses = np.stack(kept)
    lo, hi = sorted(levels)
    return IrfResult(
        response_names=draws.names,
        shock_names=draws.names,
        horizons=np.arange(horizon + 1),
        responses=responses,
        median=np.median(responses, axis=0),
        lower=np.quantile(responses, lo, axis=0),
        upper=np.quantile(responses, hi, axis=0),
        levels=(lo, hi),
        n_skipped=skipped,
    )


def build_dummy_obs(
    sigmas: np.ndarray,
    means: np.ndarray,
    p: int = 2,
    tightness: float = 0.95,
    intercept_scale: float = 0.95,
    theta: float | None = None,
    prior_lag_means: np.ndarray | None = None,
) -> DummyObs:
    """Dummy observations implementing the Minnesota-style normal
    inverse-Wishart prior plus sum-of-coefficients rows.

    sigmas: per-variable AR residual standard deviations; means: sample
    means; prior_lag_means m_i default to 1 (persistent variables). theta
    defaults to 12 * tightness. Regressor columns are ordered
    [lag 1 block, ..., lag p block, intercept].
    """
    sigmas = np.asarray(sigmas, dtype=float)
    means = np.asarray(means, dtype=float)
    n = sigmas.size
    if np.any(sigmas <= 0):
        raise ValueError("all residual scales must be positive")
    if means.size != n:
        raise ValueError("means and sigmas must have the same length")
    m = np.ones(n) if prior_lag_means is None else np.asarray(prior_lag_means, float)
    f = float(tightness)
    c = float(intercept_scale)
    th = 12.0 * f if theta is None else float(theta)

    # coefficient block: prior means on the first lag, zero on further lags
    y_top = np.vstack([np.diag(m * sigmas) / f, np.zeros(((p - 1) * n, n))])
    d = np.diag(np.arange(1, p + 1).astype(float))
    x_top = np.hstack([np.kron(d, np.diag(sigmas)) / f, np.zeros((p * n, 1))])
    # covariance block
    y_mid = np.diag(sigmas)
    x_mid = np.zeros((n, p * n + 1))
    # diffuse intercept row
    y_bot = np.zeros((1, n))
    x_bot = np.zeros((1, p * n + 1))
    x_bot[0, -1] = c
    y_d1 = np.vstack([y_top, y_mid, y_bot])
    x_d1 = np.vstack([x_top, x_mid, x_bot])

    # sum-of-coefficients rows, lag blocks scaled by the lag index
    y_d2 = np.diag(m * means) / th
    lag_row = np.arange(1, p + 1).astype(float)[None, :]
    x_d2 = np.hstack([np.kron(lag_row, np.diag(m * means)) / th, np.zeros((n, 1))])
    return DummyObs(y_d1, x_d1, y_d2, x_d2, p, f, c, th)


def gibbs_dummy_bvar(
    values: np.ndarray,
    dummies: DummyObs,
    n_total: int = 100_000,
    n_burn: int = 90_000,
    seed: int = 0,
    names: tuple[str, ...] | None = None,
) -> PosteriorDraws:
    """Posterior of the VAR(p) fit by least squares on the dummy-augmented
    dataset: Σ_e ~ IW(T_d + T, Σ_a) and vec(Θ) | Σ_e ~ N(vec(Θ_a),
    Σ_e ⊗ (X_a'X_a)^{-1}).
    """
    if n_total <= n_burn:
        raise ValueError("n_total must exceed n_burn")
    values = np.asarray(values, dtype=float)
    t, n = values.shape
    p = dummies.p
    if t <= p:
        raise ValueError("not enough observations for the lag order")
    names = tuple(names) if names else tuple(f"v{i}" for i in range(n))

    y = values[p:]
    blocks = [values[p - lag : t - lag] for lag in range(1, p + 1)]
    x = np.hstack(blocks + [np.ones((t - p, 1))])
    x_a = np.vstack([x, dummies.x_d])
    y_a = np.vstack([y, dummies.y_d])

    xtx = x_a.T @ x_a
    if np.linalg.matrix_rank(xtx) < xtx.shape[0]:
        raise NumericError("augmented design is rank deficient")
    theta_a = np.linalg.solve(xtx, x_a.T @ y_a)
    resid_a = y_a - x_a @ theta_a
    sigma_a = symmetrize(resid_a.T @ resid_a)
    dof = dummies.t_d + y.shape[0]

    xtx_chol = chol_lower(xtx, "X_a'X_a")
    row_factor = solve_triangular(xtx_chol.T, np.eye(xtx.shape[0]), lower=False)

    rng = np.random.default_rng(seed)
    n_keep = n_total - n_burn
    r = p * n + 1
    phi_out = np.empty((n_keep, r, n))
    sigma_out = np.empty((n_keep, n, n))
    kept = 0
    for it in range(n_total):
        sigma = sample_inverse_wishart(rng, dof, sigma_a)
        col = chol_lower(sigma, "sigma draw")
        theta = theta_a + row_factor @ rng.standard_normal((r, n)) @ col.T
        if it >= n_burn:
            # reorder rows to the intercept-first layout used by PosteriorDraws
            phi_out[kept] = np.vstack([theta[-1:], theta[:-1]])
            sigma_out[kept] = sigma
            kept += 1
    return PosteriorDraws(
        names,
        n,
        p,
        True,
        "dummy_obs",
        phi_out,
        sigma_out,
        n_burn,
        False,
        seed,
        analytic_params={
            "theta_a": theta_a,
            "sigma_a": sigma_a,
            "dof": dof,
            "xtx": xtx,
        },
    )


def _orthonormal_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    """QR-based rotation with the R diagonal normalized positive."""
    m = rng.standard_normal((n, n))
    q, r = np.linalg.qr(m)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def sign_restricted_irf(
    draws: PosteriorDraws,
    restriction: SignRestriction,
    horizon: int = 24,
    max_tries: int = 1000,
    seed: int = 0,
    levels: tuple[float, float] = (0.16, 0.84),
) -> IrfResult:
    """Accept QR rotations of the Cholesky factor whose restricted-shock
    responses carry the required signs.

    Per retained draw, candidates Ω = QΩ0 (so Ω'Ω = Σ_e) are generated
    until one satisfies every constraint or `max_tries` is exhausted, in
    which case the draw is dropped and counted. Summaries are pointwise
    medians with quantile bands over accepted draws.
    """
    k, p = draws.k, draws.p
    if len(restriction.signs) != k:
        raise ValueError(f"restriction covers {len(restriction.signs)} variables, model has {k}")
    if horizon < 1:
        raise ValueError("IRF horizon must be >= 1")
    check_horizons = tuple(restriction.horizons) or (0,)
    if max(check_horizons) > horizon:
        raise ValueError("restriction horizon exceeds the traced horizon")
    sign_vec = np.asarray(restriction.signs, dtype=float)
    constrained = sign_vec != 0

    kept = []
    n_tries = 0
    n_accepted = 0
    n_dropped = 0
    for s in range(draws.n_draws):
        sigma = draws.sigma[s]
        omega0 = chol_lower(sigma, f"sigma draw {s}").T  # upper, Σ = Ω0'Ω0
        psi = _reduced_form_responses(draws.phi[s], k, p, draws.intercept, horizon)
        rng = np.random.default_rng([seed, s])
        accepted = None
        for _ in range(max_tries):
            n_tries += 1
            q = _orthonormal_rotation(rng, k)
            omega = q @ omega0
            impact_row = omega[restriction.shock]
            ok = True
            for h in check_horizons:
                resp = psi[h] @ impact_row
                if np.any(sign_vec[constrained] * resp[constrained] <= 0):
                    ok = False
                    break
            if ok:
                accepted = omega
                n_accepted += 1
                break
        if accepted is None:
            n_dropped += 1
            continue
        kept.append(np.einsum("hij,j->hi", psi, accepted[restriction.shock])[:, :, None])
    rate = n_accepted / n_tries if n_tries else 0.0
    if not kept:
        raise NumericError(
            f"no rotations accepted over {n_tries} tries (acceptance rate {rate:.4f})"
        )
    responses = np.stack(kept)
    lo, hi = sorted(levels)
    return IrfResult(
        response_names=draws.names,
        shock_names=(draws.names[restriction.shock],),
        horizons=np.arange(horizon + 1),
        responses=responses,
        median=np.median(responses, axis=0),
        lower=np.quantile(responses, lo, axis=0),
        upper=np.quantile(responses, hi, axis=0),
        levels=(lo, hi),
        n_dropped=n_dropped,
        acceptance_rate=rate,
    )


def save_irf(result: IrfResult, path: str | Path, header_comment: str = "") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        if result.acceptance_rate is not None:
            fh.write(f"# acceptance_rate = {result.acceptance_rate!r}\n")
            fh.write(f"# dropped_draws = {result.n_dropped}\n")
        if result.n_skipped:
            fh.write(f"# skipped_draws = {result.n_skipped}\n")
        writer = csv.writer(fh)
        writer.writerow(["horizon", "response", "shock", "median", "lower", "upper"])
        for h_idx, h in enumerate(result.horizons):
            for i, resp in enumerate(result.response_names):
                for j, shock in enumerate(result.shock_names):
                    writer.writerow(
                        [
                            int(h),
                            resp,
                            shock,
                            repr(float(result.median[h_idx, i, j])),
                            repr(float(result.lower[h_idx, i, j])),
                            repr(float(result.upper[h_idx, i, j])),
                        ]
                    )


def save_acceptance_report(result: IrfResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"accepted_draws = {result.responses.shape[0]}\n")
        fh.write(f"dropped_draws = {result.n_dropped}\n")
        if result.acceptance_rate is not None:
            fh.write(f"acceptance_rate = {result.acceptance_rate!r}\n")
