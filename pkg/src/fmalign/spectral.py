"""Symmetric eigensolves, trivial-mode filtering, loss functions, and the
one-shot dense joint solver used as the correctness oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .graph import IncidenceMatrix, SimilarityGraph, inv_sqrt_degrees

# Eigenvalues at or below this are treated as trivial (zero) modes.
DEFAULT_SKIP_TOL = 1e-9

SYMMETRY_TOL = 1e-10


@dataclass
class SpectralBasis:
    """Orthonormal eigenvector columns with ascending eigenvalues.

    Sign convention: in each column the entry of largest magnitude is positive
    (first such entry on ties), which makes solves reproducible.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray


@dataclass
class Embedding:
    """Per-row coordinates in the joint space, tagged with row provenance."""

    coordinates: np.ndarray
    row_domain: np.ndarray
    dimension: int


def apply_sign_convention(vectors: np.ndarray) -> np.ndarray:
    vectors = vectors.copy()
    for c in range(vectors.shape[1]):
        col = vectors[:, c]
        if col[np.argmax(np.abs(col))] < 0:
            vectors[:, c] = -col
    return vectors


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"operator must be square, got {M.shape}")
    if M.shape[0] and np.max(np.abs(M - M.T)) > SYMMETRY_TOL:
        raise ValueError("operator is not symmetric within 1e-10")
    return (M + M.T) / 2.0


def split_modes(
    M: np.ndarray, count: int, skip_tol: float = DEFAULT_SKIP_TOL
) -> tuple[SpectralBasis, SpectralBasis]:
    """Smallest `count` nontrivial eigenpairs plus all trivial ones below skip_tol.

    The trivial modes are a byproduct of the same solve; callers that update
    the spectrum keep them in the working basis and filter after the update.
    """
    M = _check_symmetric(M)
    dim = M.shape[0]
    if count < 1:
        raise ValueError("count must be >= 1")
    if count > dim:
        raise ValueError(f"requested {count} modes from a {dim}-dimensional operator")

    # grow the computed window until `count` nontrivial modes are found
    want = min(dim, count + 8)
    while True:
        lam, phi = scipy.linalg.eigh(M, subset_by_index=(0, want - 1))
        nontrivial = np.flatnonzero(lam > skip_tol)
        if nontrivial.size >= count or want == dim:
            break
        want = min(dim, max(want * 2, count + nontrivial.size + 8))
    if nontrivial.size < count:
        raise ValueError(
            f"only {nontrivial.size} nontrivial eigenpairs available, requested {count}"
        )
    keep = nontrivial[:count]
    trivial = np.flatnonzero(lam <= skip_tol)
    phi = apply_sign_convention(phi)
    return (
        SpectralBasis(vectors=phi[:, keep], eigenvalues=lam[keep]),
        SpectralBasis(vectors=phi[:, trivial], eigenvalues=lam[trivial]),
    )


def eig_smallest(
    M: np.ndarray, count: int, skip_tol: float = DEFAULT_SKIP_TOL
) -> SpectralBasis:
    """The `count` smallest eigenpairs above skip_tol, ascending, sign-normalized."""
    basis, _ = split_modes(M, count, skip_tol)
    return basis


def loss_intra(Z: Embedding, graphs: list[SimilarityGraph]) -> float:
    """Sum over ordered sample pairs of W_ij ||z_i - z_j||^2, per domain.

    Each undirected edge contributes twice (both orderings), matching the
    convention fixed for the trace identity in :func:`loss_joint`.
    """
    coords = np.asarray(Z.coordinates, dtype=float)
    sizes = [g.weights.shape[0] for g in graphs]
    if sum(sizes) != coords.shape[0]:
        raise ValueError(
            f"embedding has {coords.shape[0]} rows but graphs cover {sum(sizes)} nodes"
        )
    total = 0.0
    offset = 0
    for g in graphs:
        block = coords[offset : offset + g.weights.shape[0]]
        W = g.weights.tocoo()
        if W.nnz:
            diff = block[W.row] - block[W.col]
            total += float(np.sum(W.data * np.sum(diff * diff, axis=1)))
        offset += g.weights.shape[0]
    return total


def loss_inter(Z: Embedding, A: IncidenceMatrix) -> float:
    """Sum over correspondence pairs of w ||z_i - z_{m1+j}||^2 (each pair once)."""
    coords = np.asarray(Z.coordinates, dtype=float)
    if coords.shape[0] != A.m1 + A.m2:
        raise ValueError(
            f"embedding has {coords.shape[0]} rows, incidence expects {A.m1 + A.m2}"
        )
    total = 0.0
    for i, j, w in A.pair_list:
        diff = coords[i] - coords[A.m1 + j]
        total += w * float(diff @ diff)
    return total


def loss_joint(Z: Embedding, L_joint: np.ndarray | sp.spmatrix) -> float:
    """Combined loss via the trace form, 2 * tr(Z^T L Z).

    With L = L* + A A^T this equals loss_intra + 2 * loss_inter: the ordered
    pair sum visits every within-domain edge and every correspondence twice,
    while loss_inter counts correspondences once.
    """
    coords = np.asarray(Z.coordinates, dtype=float)
    if sp.issparse(L_joint):
        return 2.0 * float(np.sum(coords * (L_joint @ coords)))
    return 2.0 * float(np.trace(coords.T @ np.asarray(L_joint) @ coords))


def disconnected_laplacian(G1: SimilarityGraph, G2: SimilarityGraph) -> sp.csr_matrix:
    return sp.block_diag([G1.laplacian, G2.laplacian]).tocsr()


def joint_laplacian(
    G1: SimilarityGraph, G2: SimilarityGraph, A: IncidenceMatrix
) -> sp.csr_matrix:
    L = disconnected_laplacian(G1, G2)
    if A.entries.shape[1]:
        L = (L + A.entries @ A.entries.T).tocsr()
    return L


def joint_spectrum(
    G1: SimilarityGraph,
    G2: SimilarityGraph,
    A: IncidenceMatrix,
    skip_tol: float = DEFAULT_SKIP_TOL,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full dense spectrum of D^{-1/2} (L* + A A^T) D^{-1/2} above skip_tol.

    D holds the within-domain degrees only (the correspondence degrees enter
    through A A^T inside the Laplacian, not the normalization). Returns the
    retained eigenvalues, eigenvectors, and the D^{-1/2} diagonal.
    """
    dis = np.concatenate([inv_sqrt_degrees(G1.degrees), inv_sqrt_degrees(G2.degrees)])
    L = joint_laplacian(G1, G2, A).toarray()
    S = dis[:, None] * L * dis[None, :]
    lam, phi = np.linalg.eigh((S + S.T) / 2.0)
    keep = lam > skip_tol
    return lam[keep], apply_sign_convention(phi[:, keep]), dis


def sma_solve(
    G1: SimilarityGraph,
    G2: SimilarityGraph,
    A: IncidenceMatrix,
    n: int,
    skip_tol: float = DEFAULT_SKIP_TOL,
    domain_ids: tuple[str, str] = ("source", "target"),
) -> Embedding:
    """One-shot dense alignment: solve the joint operator fully and embed.

    Z = D^{-1/2} Phi_{:,1:n} Lambda^{-1/2}. Dense solve of the full joint
    matrix; intended for oracle use and small problems.
    """
    lam, phi, dis = joint_spectrum(G1, G2, A, skip_tol)
    if lam.size < n:
        raise ValueError(f"only {lam.size} nontrivial modes available, requested {n}")
    Z = dis[:, None] * phi[:, :n] / np.sqrt(lam[:n])[None, :]
    m1 = G1.degrees.size
    m2 = G2.degrees.size
    row_domain = np.array([domain_ids[0]] * m1 + [domain_ids[1]] * m2)
    return Embedding(coordinates=Z, row_domain=row_domain, dimension=n)
