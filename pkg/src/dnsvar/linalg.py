"""Small linear-algebra and sampling helpers used by several modules."""

from __future__ import annotations

import numpy as np

from .errors import NumericError


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def chol_lower(a: np.ndarray, context: str = "") -> np.ndarray:
    """Lower Cholesky factor; raises NumericError instead of LinAlgError."""
    try:
        return np.linalg.cholesky(symmetrize(a))
    except np.linalg.LinAlgError as exc:
        where = f" ({context})" if context else ""
        raise NumericError(f"matrix not positive definite{where}") from exc


def psd_factor(a: np.ndarray) -> np.ndarray:
    """Factor L with LL' = a for symmetric PSD a, tolerating zero eigenvalues.

    Falls back to an eigendecomposition when the Cholesky fails, clipping
    small negative eigenvalues; used where exactly-singular covariances are
    legitimate (e.g. zero-noise toy systems).
    """
    a = symmetrize(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(a)
        tol = max(a.shape[0], 1) * np.finfo(float).eps * max(w.max(initial=0.0), 1.0)
        if w.min(initial=0.0) < -tol:
            raise NumericError("matrix has negative eigenvalues; not PSD")
        return v * np.sqrt(np.clip(w, 0.0, None))


def is_symmetric_psd(a: np.ndarray, tol: float = 1e-10) -> bool:
    if not np.allclose(a, a.T, atol=tol):
        return False
    w = np.linalg.eigvalsh(symmetrize(a))
    return bool(w.min(initial=0.0) >= -tol * max(1.0, abs(w).max(initial=1.0)))


def companion_matrix(coeffs: list[np.ndarray] | tuple[np.ndarray, ...]) -> np.ndarray:
    """Companion-form matrix of a VAR(p) given [A_1, ..., A_p]."""
    p = len(coeffs)
    k = coeffs[0].shape[0]
    comp = np.zeros((k * p, k * p))
    comp[:k, :] = np.hstack(coeffs)
    if p > 1:
        comp[k:, :-k] = np.eye(k * (p - 1))
    return comp


def spectral_radius(a: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(a)).max()) if a.size else 0.0


def sample_inverse_wishart(rng: np.random.Generator, df: float, scale: np.ndarray) -> np.ndarray:
    """Draw from an inverse-Wishart with degrees of freedom `df` and scale `scale`.

    Uses the Bartlett decomposition of the Wishart for the precision:
    if X ~ W(df, scale^{-1}) then X^{-1} ~ W^{-1}(df, scale).
    Requires df > k - 1.
    """
    k = scale.shape[0]
    if df <= k - 1:
        raise NumericError(f"inverse-Wishart needs df > k-1 ({df} <= {k - 1})")
    l_inv = chol_lower(np.linalg.inv(symmetrize(scale)), "IW scale inverse")
    bart = np.zeros((k, k))
    di = np.arange(k)
    bart[di, di] = np.sqrt(rng.chisquare(df - di))
    if k > 1:
        rows, cols = np.tril_indices(k, -1)
        bart[rows, cols] = rng.standard_normal(rows.size)
    factor = l_inv @ bart          # chol of the Wishart precision draw
    prec = factor @ factor.T
    draw = np.linalg.inv(prec)
    return symmetrize(draw)


def sample_matrix_normal(
    rng: np.random.Generator,
    mean: np.ndarray,
    row_chol: np.ndarray,
    col_chol: np.ndarray,
) -> np.ndarray:
    """Draw from MN(mean, rowcov, colcov) given Cholesky-type factors.

    row_chol @ row_chol.T must equal the row covariance and likewise for
    col_chol; vec (column stacking) of the draw has covariance
    colcov ⊗ rowcov.
    """
    e = rng.standard_normal(mean.shape)
    return mean + row_chol @ e @ col_chol.T
