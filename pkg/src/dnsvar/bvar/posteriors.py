"""Posterior computation for the five prior families.

Minnesota, natural conjugate and diffuse posteriors are analytic (draws are
sampled from closed forms); the independent normal-inverse-Wishart and SSVS
posteriors are simulated by Gibbs sampling. All samplers are deterministic
functions of (inputs, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import NumericError
from ..linalg import chol_lower, sample_inverse_wishart, symmetrize
from .design import VarDesign, fit_ar1_residual_scales as _ar1_scales
from ..ns_factors import FactorSeries
from .priors import (
    IndepNIW,
    Minnesota,
    NaturalConjugate,
    Ssvs,
    conjugate_phi_variances,
    default_dof,
    minnesota_mean,
    minnesota_variances,
)


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained draws of (coefficients, error covariance) from any prior."""

    names: tuple[str, ...]
    k: int
    p: int
    intercept: bool
    prior: str
    phi: np.ndarray              # n_draws x r x k
    sigma: np.ndarray            # n_draws x k x k
    n_burned: int
    analytic: bool
    seed: int | None
    gamma: np.ndarray | None = None   # n_draws x kr inclusion indicators
    delta: np.ndarray | None = None   # n_draws x n_offdiag indicators
    analytic_params: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.phi.shape[0]

    def coefficient_vectors(self) -> np.ndarray:
        """Stacked equation-major coefficient draws, n_draws x kr."""
        n, r, k = self.phi.shape
        return self.phi.reshape(n, r * k, order="F")

    def inclusion_probabilities(self) -> np.ndarray:
        if self.gamma is None:
            raise ValueError("no inclusion indicators for this prior")
        return self.gamma.mean(axis=0)


def design_scales(design: VarDesign) -> np.ndarray:
    """AR(1) residual variances of the underlying series."""
    series = FactorSeries(
        tuple(str(i) for i in range(design.data.shape[0])), design.names, design.data
    )
    return _ar1_scales(series)


def _draw_mvn_from_precision(rng, precision: np.ndarray, rhs: np.ndarray, n: int):
    """Mean solve + draws for N(P^{-1} rhs, P^{-1}); returns (mean, draws n x d)."""
    chol = chol_lower(precision, "posterior precision")
    mean = np.linalg.solve(precision, rhs)
    z = rng.standard_normal((n, rhs.size))
    draws = mean + solve_triangular(chol.T, z.T, lower=False).T
    return mean, draws


def _verify_pd(sigma: np.ndarray, what: str) -> None:
    try:
        np.linalg.cholesky(symmetrize(sigma))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{what} draw is not positive definite") from exc


def minnesota_posterior(
    design: VarDesign,
    prior: Minnesota = Minnesota(),
    n_draws: int = 1000,
    seed: int = 0,
    scales: np.ndarray | None = None,
) -> PosteriorDraws:
    """Analytic normal posterior for the coefficients with Σ fixed at the
    diagonal of AR(1) residual variances."""
    scales = design_scales(design) if scales is None else np.asarray(scales, float)
    sigma_hat = np.diag(scales)
    sigma_hat_inv = np.diag(1.0 / scales)
    prior_mean = minnesota_mean(design, prior.persistence)
    prior_var = minnesota_variances(design, prior, scales)

    gtg = design.g.T @ design.g
    gtf = design.g.T @ design.f
    # Ω'(I ⊗ Σ̂^{-1})Ω = Σ̂^{-1} ⊗ G'G and Ω'(I ⊗ Σ̂^{-1})f = vec(G'FΣ̂^{-1})
    precision = np.diag(1.0 / prior_var) + np.kron(sigma_hat_inv, gtg)
    rhs = prior_mean / prior_var + (gtf @ sigma_hat_inv).ravel(order="F")

    rng = np.random.default_rng(seed)
    a_hat, draws = _draw_mvn_from_precision(rng, precision, rhs, n_draws)
    phi = draws.reshape(n_draws, design.r, design.k, order="F")
    sigma = np.broadcast_to(sigma_hat, (n_draws, design.k, design.k)).copy()
    return PosteriorDraws(
        design.names,
        design.k,
        design.p,
        design.intercept,
        "minnesota",
        phi,
        sigma,
        0,
        True,
        seed,
        analytic_params={
            "a_hat": a_hat,
            "precision": precision,
            "sigma_fixed": sigma_hat,
        },
    )


def conjugate_posterior(
    design: VarDesign,
    prior: NaturalConjugate = NaturalConjugate(),
    n_draws: int = 1000,
    seed: int = 0,
    scales: np.ndarray | None = None,
) -> PosteriorDraws:
    """Normal-inverse-Wishart posterior in closed form.

    V_Φ = Σ_Φ^{-1} + G'G, Φ̂ = V_Φ^{-1}(Σ_Φ^{-1}Φ0 + G'F),
    Ŝ_c = S_c0 - Φ̂'V_ΦΦ̂ + Φ0'Σ_Φ^{-1}Φ0 + F'F on s_h0 + T degrees of
    freedom. The posterior mean of Σ follows the standard inverse-Wishart
    convention Ŝ_c/(dof - k - 1).
    """
    k, r = design.k, design.r
    if scales is None:
        scales = (
            design_scales(design) if design.t_eff > 0 else np.ones(k)
        )
    phi0 = prior.phi0 if prior.phi0 is not None else np.zeros((r, k))
    phi0 = np.asarray(phi0, dtype=float).reshape(r, k)
    s_c0 = prior.s_c0 if prior.s_c0 is not None else np.diag(scales)
    dof0 = default_dof(design, prior.s_h0)

    phi_var = conjugate_phi_variances(design, prior, scales)
    phi_prec = np.diag(1.0 / phi_var)
    v_phi = phi_prec + design.g.T @ design.g
    phi_hat = np.linalg.solve(v_phi, phi_prec @ phi0 + design.g.T @ design.f)
    s_c_hat = symmetrize(
        s_c0
        - phi_hat.T @ v_phi @ phi_hat
        + phi0.T @ phi_prec @ phi0
        + design.f.T @ design.f
    )
    dof = dof0 + design.t_eff
    _check_pd_scale(s_c_hat, "posterior scale matrix")

    v_chol = chol_lower(v_phi, "V_Phi")
    rng = np.random.default_rng(seed)
    phi = np.empty((n_draws, r, k))
    sigma = np.empty((n_draws, k, k))
    eye_r = np.eye(r)
    row_factor = solve_triangular(v_chol.T, eye_r, lower=False)  # chol of V_Φ^{-1}
    for s in range(n_draws):
        sig = sample_inverse_wishart(rng, dof, s_c_hat)
        _verify_pd(sig, "inverse-Wishart")
        sigma[s] = sig
        col = chol_lower(sig, "sigma draw")
        phi[s] = phi_hat + row_factor @ rng.standard_normal((r, k)) @ col.T
    sigma_mean = s_c_hat / (dof - k - 1) if dof > k + 1 else None
    return PosteriorDraws(
        design.names,
        design.k,
        design.p,
        design.intercept,
        "conjugate",
        phi,
        sigma,
        0,
        True,
        seed,
        analytic_params={
            "phi_hat": phi_hat,
            "v_phi": v_phi,
            "s_c_hat": s_c_hat,
            "dof": dof,
            "sigma_mean": sigma_mean,
        },
    )


def _check_pd_scale(mat: np.ndarray, what: str) -> None:
    try:
        np.linalg.cholesky(symmetrize(mat))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{what} is not positive definite") from exc


def diffuse_posterior(
    design: VarDesign,
    n_draws: int = 1000,
    seed: int = 0,
) -> PosteriorDraws:
    """Standard noninformative posterior: Σ ~ IW(T-r, U'U) and
    vec(Φ)|Σ ~ N(vec(Φ̂_MLS), Σ ⊗ (G'G)^{-1})."""
    k, r = design.k, design.r
    dof = design.t_eff - r
    if dof <= k - 1:
        raise ValueError(
            f"diffuse posterior undefined: T_eff - r = {dof} must exceed k-1 = {k - 1}"
        )
    beta, _, rank, _ = np.linalg.lstsq(design.g, design.f, rcond=None)
    if rank < r:
        raise NumericError("rank-deficient design in diffuse posterior")
    resid = design.f - design.g @ beta
    scale = symmetrize(resid.T @ resid)
    _check_pd_scale(scale, "residual scale matrix")
    gtg = design.g.T @ design.g
    v_chol = chol_lower(gtg, "G'G")
    row_factor = solve_triangular(v_chol.T, np.eye(r), lower=False)

    rng = np.random.default_rng(seed)
    phi = np.empty((n_draws, r, k))
    sigma = np.empty((n_draws, k, k))
    for s in range(n_draws):
        sig = sample_inverse_wishart(rng, dof, scale)
        _verify_pd(sig, "inverse-Wishart")
        sigma[s] = sig
        col = chol_lower(sig, "sigma draw")
        phi[s] = beta + row_factor @ rng.standard_normal((r, k)) @ col.T
    return PosteriorDraws(
        design.names,
        design.k,
        design.p,
        design.intercept,
        "diffuse",
        phi,
        sigma,
        0,
        True,
        seed,
        analytic_params={"phi_hat": beta, "dof": dof, "scale": scale},
    )


def gibbs_indep_niw(
    design: VarDesign,
    prior: IndepNIW = IndepNIW(),
    n_total: int = 11_000,
    n_burn: int = 1_000,
    seed: int = 0,
    scales: np.ndarray | None = None,
) -> PosteriorDraws:
    """Gibbs sampler alternating A | Σ (normal) and Σ | A (inverse-Wishart).

    Retains the last n_total - n_burn cycles; bitwise reproducible from the
    seed.
    """
    if n_total <= n_burn:
        raise ValueError("n_total must exceed n_burn")
    k, r, kr = design.k, design.r, design.n_coef
    scales = design_scales(design) if scales is None else np.asarray(scales, float)
    a0 = prior.a0 if prior.a0 is not None else np.zeros(kr)
    a0 = np.asarray(a0, dtype=float).reshape(kr)
    s_c0 = prior.s_c0 if prior.s_c0 is not None else np.diag(scales)
    dof0 = default_dof(design, prior.s_h0)

    v_a = minnesota_variances(design, prior, scales)
    prior_prec_diag = 1.0 / v_a
    prior_rhs = a0 / v_a

    g, f = design.g, design.f
    gtg = g.T @ g
    t_eff = design.t_eff
    rng = np.random.default_rng(seed)

    n_keep = n_total - n_burn
    phi_out = np.empty((n_keep, r, k))
    sigma_out = np.empty((n_keep, k, k))

    a_vec = a0.copy()
    phi = a_vec.reshape(r, k, order="F")
    kept = 0
    for it in range(n_total):
        # Σ | A
        resid = f - g @ phi
        scale = s_c0 + resid.T @ resid
        sigma = sample_inverse_wishart(rng, dof0 + t_eff, scale)
        # A | Σ
        sigma_inv = np.linalg.inv(sigma)
        precision = np.kron(sigma_inv, gtg)
        precision[np.diag_indices_from(precision)] += prior_prec_diag
        rhs = prior_rhs + (g.T @ f @ sigma_inv).ravel(order="F")
        try:
            chol = np.linalg.cholesky(symmetrize(precision))
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"non-PD conditional precision at draw {it}") from exc
        mean = np.linalg.solve(precision, rhs)
        a_vec = mean + solve_triangular(chol.T, rng.standard_normal(kr), lower=False)
        phi = a_vec.reshape(r, k, order="F")
        if it >= n_burn:
            _verify_pd(sigma, "inverse-Wishart")
            phi_out[kept] = phi
            sigma_out[kept] = sigma
            kept += 1
    return PosteriorDraws(
        design.names,
        design.k,
        design.p,
        design.intercept,
        "indep_niw",
        phi_out,
        sigma_out,
        n_burn,
        False,
        seed,
    )


def _upper_factor_of_inverse(sigma: np.ndarray) -> np.ndarray:
    """Upper-triangular Ψ with ΨΨ' = Σ^{-1} (positive diagonal)."""
    prec = np.linalg.inv(symmetrize(sigma))
    rev = prec[::-1, ::-1]
    low = chol_lower(rev, "precision")
    return low[::-1, ::-1]


def gibbs_ssvs(
    design: VarDesign,
    prior: Ssvs = Ssvs(),
    n_total: int = 11_000,
    n_burn: int = 1_000,
    seed: int = 0,
) -> PosteriorDraws:
    """Stochastic search variable selection on the stacked coefficients.

    Partial mode mixes spike/slab normals on each coefficient (indicators γ)
    with an inverse-Wishart on Σ. Full mode additionally applies spike/slab
    selection to the off-diagonal elements of the triangular factor of the
    error precision (indicators δ) with Gamma priors on its squared
    diagonal. Designs must carry no intercept.
    """
    if design.intercept:
        raise ValueError("SSVS operates on designs built without intercepts")
    if n_total <= n_burn:
        raise ValueError("n_total must exceed n_burn")
    k, r, kr = design.k, design.r, design.n_coef
    g, f = design.g, design.f
    t_eff = design.t_eff

    beta, _, rank, _ = np.linalg.lstsq(g, f, rcond=None)
    if rank < r:
        raise NumericError("singular unrestricted VAR in SSVS setup")
    resid_ml = f - g @ beta
    sigma_ml = symmetrize(resid_ml.T @ resid_ml / t_eff)
    gtg = g.T @ g
    gtg_inv = np.linalg.inv(gtg)
    coef_var = np.kron(np.diag(sigma_ml), np.diag(gtg_inv))
    coef_sd = np.sqrt(np.diag(coef_var)) if coef_var.ndim == 2 else np.sqrt(coef_var)
    sd0 = prior.c0 * coef_sd
    sd1 = prior.c1 * coef_sd

    s_c0 = prior.s_c0 if prior.s_c0 is not None else np.eye(k)
    dof0 = default_dof(design, prior.s_h0)

    log_p1 = np.log(prior.p_prior)
    log_p0 = np.log(1.0 - prior.p_prior)

    rng = np.random.default_rng(seed)
    n_keep = n_total - n_burn
    n_off = k * (k - 1) // 2
    phi_out = np.empty((n_keep, r, k))
    sigma_out = np.empty((n_keep, k, k))
    gamma_out = np.empty((n_keep, kr))
    delta_out = np.empty((n_keep, n_off)) if prior.full else None

    a_vec = beta.ravel(order="F")
    gamma = np.ones(kr)
    sigma = sigma_ml.copy()
    psi = _upper_factor_of_inverse(sigma) if prior.full else None
    delta = np.ones(n_off)
    kept = 0
    for it in range(n_total):
        # γ | A: Bernoulli odds of slab vs spike component
        lp1 = log_p1 - np.log(sd1) - 0.5 * (a_vec / sd1) ** 2
        lp0 = log_p0 - np.log(sd0) - 0.5 * (a_vec / sd0) ** 2
        prob = 1.0 / (1.0 + np.exp(lp0 - lp1))
        gamma = (rng.random(kr) < prob).astype(float)

        # A | γ, Σ
        mix_var = np.where(gamma > 0.5, sd1**2, sd0**2)
        if prior.full:
            sigma_inv = psi @ psi.T
        else:
            sigma_inv = np.linalg.inv(sigma)
        precision = np.kron(sigma_inv, gtg)
        precision[np.diag_indices_from(precision)] += 1.0 / mix_var
        rhs = (g.T @ f @ sigma_inv).ravel(order="F")
        try:
            chol = np.linalg.cholesky(symmetrize(precision))
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"non-PD conditional precision at draw {it}") from exc
        mean = np.linalg.solve(precision, rhs)
        a_vec = mean + solve_triangular(chol.T, rng.standard_normal(kr), lower=False)
        phi = a_vec.reshape(r, k, order="F")
        resid = f - g @ phi
        ssp = resid.T @ resid

        if not prior.full:
            sigma = sample_inverse_wishart(rng, dof0 + t_eff, s_c0 + ssp)
        else:
            psi, delta = _draw_precision_factor(rng, ssp, t_eff, psi, delta, prior)
            sigma = symmetrize(np.linalg.inv(psi @ psi.T))

        if it >= n_burn:
            _verify_pd(sigma, "error covariance")
            phi_out[kept] = phi
            sigma_out[kept] = sigma
            gamma_out[kept] = gamma
            if prior.full:
                delta_out[kept] = delta
            kept += 1
    return PosteriorDraws(
        design.names,
        design.k,
        design.p,
        design.intercept,
        "ssvs_full" if prior.full else "ssvs",
        phi_out,
        sigma_out,
        n_burn,
        False,
        seed,
        gamma=gamma_out,
        delta=delta_out,
    )


def _offdiag_slices(k: int):
    """Column-wise index ranges of the stacked upper off-diagonal vector."""
    out = []
    start = 0
    for j in range(1, k):
        out.append((j, slice(start, start + j)))
        start += j
    return out


def _draw_precision_factor(rng, ssp, t_eff, psi, delta, prior: Ssvs):
    """One sweep over the triangular factor Ψ of the error precision.

    Squared diagonals are Gamma; each super-diagonal column is normal given
    its spike/slab scales; indicator update is Bernoulli.
    """
    k = psi.shape[0]
    psi = psi.copy()
    delta = delta.copy()
    cols = _offdiag_slices(k)

    # diagonal and off-diagonal column draws
    for j in range(k):
        if j == 0:
            b_j = ssp[0, 0]
        else:
            block = ssp[:j, :j]
            s_j = ssp[:j, j]
            h = np.where(delta[cols[j - 1][1]] > 0.5, prior.tau1, prior.tau0)
            prior_prec = np.diag(1.0 / h**2)
            delta_cov = np.linalg.inv(block + prior_prec)
            b_j = ssp[j, j] - s_j @ delta_cov @ s_j
        shape = prior.gamma_shape + 0.5 * t_eff
        rate = prior.gamma_rate + 0.5 * b_j
        psi[j, j] = np.sqrt(rng.gamma(shape, 1.0 / rate))
        if j > 0:
            mean = -psi[j, j] * delta_cov @ s_j
            low = chol_lower(delta_cov, "precision-factor column covariance")
            psi[:j, j] = mean + low @ rng.standard_normal(j)

    # δ | Ψ
    lq1 = np.log(prior.q_prior)
    lq0 = np.log(1.0 - prior.q_prior)
    for j, sl in cols:
        vals = psi[:j, j]
        lp1 = lq1 - np.log(prior.tau1) - 0.5 * (vals / prior.tau1) ** 2
        lp0 = lq0 - np.log(prior.tau0) - 0.5 * (vals / prior.tau0) ** 2
        prob = 1.0 / (1.0 + np.exp(lp0 - lp1))
        delta[sl] = (rng.random(j) < prob).astype(float)
    return psi, delta


def save_draws(draws: PosteriorDraws, path: str | Path) -> None:
    """Persist a draw store with a header recording prior, seed and counts."""
    header = {
        "names": list(draws.names),
        "k": draws.k,
        "p": draws.p,
        "intercept": draws.intercept,
        "prior": draws.prior,
        "n_burned": draws.n_burned,
        "analytic": draws.analytic,
        "seed": draws.seed,
    }
    arrays = {"phi": draws.phi, "sigma": draws.sigma}
    if draws.gamma is not None:
        arrays["gamma"] = draws.gamma
    if draws.delta is not None:
        arrays["delta"] = draws.delta
    np.savez(path, header=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **arrays)


def load_draws(path: str | Path) -> PosteriorDraws:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        return PosteriorDraws(
            names=tuple(header["names"]),
            k=header["k"],
            p=header["p"],
            intercept=header["intercept"],
            prior=header["prior"],
            phi=data["phi"],
            sigma=data["sigma"],
            n_burned=header["n_burned"],
            analytic=header["analytic"],
            seed=header["seed"],
            gamma=data["gamma"] if "gamma" in data else None,
            delta=data["delta"] if "delta" in data else None,
        )
