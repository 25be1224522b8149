"""Within-domain similarity graphs and the cross-domain incidence matrix."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dataset import DataMatrix

# Added to every degree before inverting, so near-isolated samples do not
# blow up D^{-1/2}.
DEGREE_EPS = 1e-8


@dataclass
class SimilarityGraph:
    """Symmetric nonnegative weight matrix with its degrees and Laplacian L = D - W."""

    weights: sp.csr_matrix
    degrees: np.ndarray
    laplacian: sp.csr_matrix


@dataclass
class IncidenceMatrix:
    """Signed node-by-edge matrix A; A @ A.T is the Laplacian of the correspondence edges.

    Column k for pair (i, j, w) holds +sqrt(w) at row i and -sqrt(w) at row m1+j.
    """

    entries: sp.csr_matrix
    pair_list: list[tuple[int, int, float]]
    m1: int
    m2: int


def _cosine_similarity(values: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"cosine similarity undefined: sample {zero[0]} is all-zero")
    unit = values / norms[:, None]
    return unit @ unit.T


def _gaussian_similarity(values: np.ndarray, k: int) -> np.ndarray:
    """Heat-kernel similarity exp(-d^2 / 2 sigma^2), sigma = median k-th neighbor distance."""
    sq = np.sum(values**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (values @ values.T), 0.0)
    kth = np.sort(np.sqrt(d2), axis=1)[:, min(k, values.shape[0] - 1)]
    sigma = float(np.median(kth))
    if sigma <= 0:
        sigma = 1.0
    return np.exp(-d2 / (2.0 * sigma * sigma))


def build_knn_graph(
    X: DataMatrix,
    k: int,
    alpha: float,
    similarity="cosine",
) -> SimilarityGraph:
    """Directed k-nearest-neighbor edges weighted alpha * sim, symmetrized by max.

    Negative similarities are clamped to zero (edge dropped) so the Laplacian
    stays positive semidefinite. Neighbor ties break toward the smaller index.
    ``similarity`` is "cosine" (feature data), "gaussian" (raw geometry, e.g.
    the synthetic manifolds where cosine collapses the radial axis), or a
    callable hook mapping the value matrix to a dense similarity matrix.
    """
    m = X.n_samples
    if not 1 <= k < m:
        raise ValueError(f"k must satisfy 1 <= k < {m}, got {k}")
    if callable(similarity):
        sim = np.asarray(similarity(X.values), dtype=float)
        if sim.shape != (m, m):
            raise ValueError(f"similarity hook returned shape {sim.shape}, expected ({m}, {m})")
        sim = sim.copy()
    elif similarity == "cosine":
        sim = _cosine_similarity(X.values)
    elif similarity == "gaussian":
        sim = _gaussian_similarity(X.values, k)
    else:
        raise ValueError(f"unknown similarity {similarity!r}")

    np.fill_diagonal(sim, -np.inf)  # no self-edges
    rows, cols, vals = [], [], []
    order_idx = np.arange(m)
    for i in range(m):
        # highest similarity first, ties toward the smaller sample index
        nbrs = np.lexsort((order_idx, -sim[i]))[:k]
        for j in nbrs:
            w = alpha * sim[i, j]
            if w > 0.0:
                rows.append(i)
                cols.append(j)
                vals.append(w)
    W = sp.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
    W = W.maximum(W.T)  # union symmetrization
    return graph_from_weights(W)


def graph_from_weights(W: sp.spmatrix) -> SimilarityGraph:
    """Wrap a symmetric nonnegative weight matrix into degrees and Laplacian."""
    W = sp.csr_matrix(W)
    degrees = np.asarray(W.sum(axis=1)).ravel()
    laplacian = sp.diags(degrees) - W
    return SimilarityGraph(weights=W, degrees=degrees, laplacian=laplacian.tocsr())


def build_incidence(
    pairs: list[tuple[int, int, float]], m1: int, m2: int
) -> IncidenceMatrix:
    """One signed column per correspondence pair; duplicates accumulate as columns."""
    rows, cols, vals = [], [], []
    clean: list[tuple[int, int, float]] = []
    for col, (i, j, w) in enumerate(pairs):
        if not (0 <= i < m1 and 0 <= j < m2):
            raise ValueError(f"correspondence pair ({i}, {j}) out of range for sizes ({m1}, {m2})")
        if w <= 0:
            raise ValueError(f"correspondence pair ({i}, {j}) has non-positive weight {w}")
        root = float(np.sqrt(w))
        rows.extend([i, m1 + j])
        cols.extend([col, col])
        vals.extend([root, -root])
        clean.append((int(i), int(j), float(w)))
    entries = sp.coo_matrix((vals, (rows, cols)), shape=(m1 + m2, len(clean))).tocsr()
    return IncidenceMatrix(entries=entries, pair_list=clean, m1=m1, m2=m2)


def correspondences_from_labels(
    src_indices: np.ndarray,
    src_labels: np.ndarray,
    tgt_indices: np.ndarray,
    tgt_labels: np.ndarray,
) -> list[tuple[int, int, float]]:
    """Pair every labeled source/target sample sharing a class, weight 1, source-major order."""
    pairs = []
    for i, li in sorted(zip(np.asarray(src_indices), np.asarray(src_labels)), key=lambda p: p[0]):
        for j, lj in sorted(zip(np.asarray(tgt_indices), np.asarray(tgt_labels)), key=lambda p: p[0]):
            if li == lj:
                pairs.append((int(i), int(j), 1.0))
    return pairs


def inv_sqrt_degrees(degrees: np.ndarray) -> np.ndarray:
    """Elementwise (d + eps)^{-1/2} with the shared degree regularization."""
    regularized = np.asarray(degrees, dtype=float) + DEGREE_EPS
    if np.any(regularized <= 0):
        bad = int(np.flatnonzero(regularized <= 0)[0])
        raise ValueError(f"sample {bad} has non-positive regularized degree")
    return 1.0 / np.sqrt(regularized)


def normalized_operator(G: SimilarityGraph) -> np.ndarray:
    """Dense symmetric D^{-1/2} L D^{-1/2}; eigenvalues lie in [0, 2]."""
    dis = inv_sqrt_degrees(G.degrees)
    S = dis[:, None] * G.laplacian.toarray() * dis[None, :]
    return (S + S.T) / 2.0


def load_correspondences_csv(path: str | Path) -> list[tuple[int, int, float]]:
    """Read "src_index,tgt_index[,weight]" rows; optional header; weight defaults to 1."""
    path = Path(path)
    if not path.exists():
        raise ValueError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: file is empty")
    try:
        int(rows[0][0])
    except ValueError:
        rows = rows[1:]  # header row
    pairs = []
    for r, row in enumerate(rows):
        if len(row) not in (2, 3):
            raise ValueError(f"{path}: row {r} needs 2 or 3 cells, got {len(row)}")
        try:
            i, j = int(row[0]), int(row[1])
            w = float(row[2]) if len(row) == 3 else 1.0
        except ValueError as exc:
            raise ValueError(f"{path}: row {r}: {exc}") from None
        pairs.append((i, j, w))
    return pairs
