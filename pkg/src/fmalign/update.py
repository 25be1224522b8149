"""Low-rank updates of singular value and symmetric eigendecompositions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralBasis, apply_sign_convention

ORTHO_DRIFT_TOL = 1e-8


@dataclass
class SvdTriple:
    """U S V^T with orthonormal U, V columns and descending nonnegative S."""

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray


def _orthogonal_complement(M: np.ndarray, basis: np.ndarray, scale: float):
    """Split M into basis coordinates plus an orthonormal residual factor.

    Returns (coeff, P, R) with M = basis @ coeff + P @ R, P orthonormal and
    orthogonal to `basis`. Residual directions below scale * eps are dropped,
    so a vanishing residual yields an empty P instead of garbage columns.
    """
    coeff = basis.T @ M
    resid = M - basis @ coeff
    # second projection pass keeps the residual numerically orthogonal to basis
    extra = basis.T @ resid
    resid = resid - basis @ extra
    coeff = coeff + extra

    if resid.size == 0:
        return coeff, np.zeros((M.shape[0], 0)), np.zeros((0, M.shape[1]))
    Pu, s, Vt = np.linalg.svd(resid, full_matrices=False)
    tol = max(M.shape) * np.finfo(float).eps * max(scale, 1e-300)
    kept = s > tol
    P = Pu[:, kept]
    R = s[kept, None] * Vt[kept]
    return coeff, P, R


def svd_update(t: SvdTriple, A: np.ndarray, B: np.ndarray) -> SvdTriple:
    """New SVD of X + A B^T given X = U S V^T, without materializing X.

    Both A and B are expanded against the current subspaces (QR of [U A] and
    [V B] in factored form), a small core matrix pads S and adds the update,
    and its dense SVD rotates the bases back out.
    """
    U, S, V = t.left, np.asarray(t.singulars, dtype=float), t.right
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] != U.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows, U has {U.shape[0]}")
    if B.shape[0] != V.shape[0]:
        raise ValueError(f"B has {B.shape[0]} rows, V has {V.shape[0]}")
    if A.shape[1] != B.shape[1]:
        raise ValueError("A and B must supply the same number of update columns")

    scale = max(float(np.linalg.norm(A)), float(np.linalg.norm(B)))
    UA, P, Ra = _orthogonal_complement(A, U, scale)
    VB, Q, Rb = _orthogonal_complement(B, V, scale)
    if U.shape[1] + P.shape[1] > U.shape[0] or V.shape[1] + Q.shape[1] > V.shape[0]:
        raise ValueError("update rank growth exceeds available rows")

    r = S.size
    core = np.zeros((r + P.shape[1], r + Q.shape[1]))
    core[:r, :r] = np.diag(S)
    core += np.vstack([UA, Ra]) @ np.vstack([VB, Rb]).T

    Uc, Sc, Vct = np.linalg.svd(core, full_matrices=False)
    return SvdTriple(
        left=np.hstack([U, P]) @ Uc,
        singulars=Sc,
        right=np.hstack([V, Q]) @ Vct.T,
    )


def block_svd_update(phi: SpectralBasis, A: np.ndarray) -> SpectralBasis:
    """Eigendecomposition of X + A A^T restricted to span(phi), given X = Phi Lam Phi^T.

    The core Lam + Phi^T A A^T Phi is symmetric PSD-shifted, so a symmetric
    eigensolve replaces the SVD and the rotation Phi'' = Phi Phi' stays
    consistent. Output is re-sorted ascending with the sign convention applied.
    """
    Phi = np.asarray(phi.vectors, dtype=float)
    lam = np.asarray(phi.eigenvalues, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != Phi.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows, basis has {Phi.shape[0]}")

    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite entries in the update matrix")
    M = Phi.T @ A
    core = np.diag(lam) + M @ M.T
    core = (core + core.T) / 2.0
    if not np.all(np.isfinite(core)):
        raise ValueError("non-finite intermediate in block update core")
    lam_new, rot = np.linalg.eigh(core)
    out = Phi @ rot  # eigh returns ascending order already

    gram_err = np.max(np.abs(out.T @ out - np.eye(out.shape[1]))) if out.size else 0.0
    if gram_err > ORTHO_DRIFT_TOL:
        out, rmat = np.linalg.qr(out)
        out = out * np.sign(np.diag(rmat))[None, :]
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite intermediate in updated basis")
    return SpectralBasis(vectors=apply_sign_convention(out), eigenvalues=lam_new)


def projection_defect(phi: SpectralBasis, A: np.ndarray, eps: float = 1e-12) -> float:
    """Relative Frobenius mass of A outside span(phi).

    0 means the truncated basis captures all correspondence information,
    1 means it discards all of it.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Phi = np.asarray(phi.vectors, dtype=float)
    resid = A - Phi @ (Phi.T @ A)
    return float(np.linalg.norm(resid) / max(np.linalg.norm(A), eps))
