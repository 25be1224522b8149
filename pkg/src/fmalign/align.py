"""Two-step alignment: per-domain spectral embedding, then a low-rank update
that joins the filtered spectra through cross-domain correspondences.

Instance mode embeds samples directly; feature mode learns per-domain linear
maps from feature space into the joint space, which also embed unseen samples.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dataset import DataMatrix, Standardizer, fit_standardizer
from .graph import (
    DEGREE_EPS,
    SimilarityGraph,
    build_incidence,
    build_knn_graph,
    inv_sqrt_degrees,
    normalized_operator,
)
from .spectral import DEFAULT_SKIP_TOL, Embedding, SpectralBasis, split_modes
from .update import block_svd_update, projection_defect

# Relative floor under which feature-covariance eigenvalues are treated as
# zero when forming the inverse square root.
COV_RANK_FLOOR = 1e-8


@dataclass(frozen=True)
class AlignmentConfig:
    """Shared knobs for both alignment modes.

    ``dim`` is the final embedding dimension; each domain contributes dim/2
    modes to the joint basis, so it must be even. ``similarity`` picks the
    neighbor metric ("cosine" for feature data, "gaussian" for raw geometry)
    and ``standardize`` controls the zero-mean/unit-variance preprocessing.
    """

    k: int = 12
    alpha: float = 0.2
    dim: int = 40
    skip_tol: float = DEFAULT_SKIP_TOL
    mode: str = "instance"
    similarity: str = "cosine"
    standardize: bool = True

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2 != 0:
            raise ValueError(f"dim must be an even number >= 2, got {self.dim}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.mode not in ("instance", "feature"):
            raise ValueError(f"mode must be 'instance' or 'feature', got {self.mode!r}")


@dataclass
class AlignmentModel:
    """Everything produced by an alignment run.

    ``basis`` holds all post-update modes above skip_tol (ascending); the
    embedding and feature maps use its first ``config.dim`` columns. The
    standardizers, degrees and training features are kept so new samples can
    be embedded after training.
    """

    config: AlignmentConfig
    embedding: Embedding
    basis: SpectralBasis
    graphs: list[SimilarityGraph]
    feature_map: list[np.ndarray] | None = None
    standardizers: list[Standardizer] | None = None
    train_values: list[np.ndarray] | None = None
    domain_ids: tuple[str, str] = ("source", "target")
    timings: dict[str, float] = field(default_factory=dict)
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def block_sizes(self) -> tuple[int, int]:
        m1 = int(np.sum(self.embedding.row_domain == self.domain_ids[0]))
        return m1, self.embedding.coordinates.shape[0] - m1

    def domain_index(self, domain: str) -> int:
        aliases = {self.domain_ids[0]: 0, self.domain_ids[1]: 1, "source": 0, "target": 1}
        if domain not in aliases:
            raise ValueError(f"unknown domain {domain!r}; expected one of {sorted(aliases)}")
        return aliases[domain]


def _standardize_pair(
    X1: DataMatrix, X2: DataMatrix, enabled: bool
) -> tuple[list[np.ndarray], list[Standardizer]]:
    values, transforms = [], []
    for X in (X1, X2):
        if enabled:
            tr = fit_standardizer(X.values)
        else:
            tr = Standardizer(
                mean=np.zeros(X.n_features), scale=np.ones(X.n_features)
            )
        values.append(tr.apply(X.values))
        transforms.append(tr)
    return values, transforms


def _assemble_blocks(
    bases: list[tuple[SpectralBasis, SpectralBasis]], sizes: list[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-block modes into one orthonormal basis, eigenvalues ascending.

    Each block contributes its requested nontrivial modes plus its trivial
    ones; the trivial modes ride through the update (correspondences lift the
    cross-domain offsets they encode) and are filtered afterwards. The stable
    sort breaks eigenvalue ties in block order.
    """
    total_rows = sum(sizes)
    cols, lams = [], []
    offset = 0
    for (nontrivial, trivial), rows in zip(bases, sizes):
        block = np.hstack([trivial.vectors, nontrivial.vectors])
        lam = np.concatenate([trivial.eigenvalues, nontrivial.eigenvalues])
        padded = np.zeros((total_rows, block.shape[1]))
        padded[offset : offset + rows] = block
        cols.append(padded)
        lams.append(lam)
        offset += rows
    Phi = np.hstack(cols)
    Lam = np.concatenate(lams)
    order = np.argsort(Lam, kind="stable")
    return Phi[:, order], Lam[order]


def _finish_update(
    Phi: np.ndarray,
    Lam: np.ndarray,
    A_scaled: np.ndarray,
    dim: int,
    skip_tol: float,
) -> tuple[SpectralBasis, np.ndarray, np.ndarray]:
    """Run the spectral update, drop trivial post-update modes, select dim columns."""
    updated = block_svd_update(SpectralBasis(vectors=Phi, eigenvalues=Lam), A_scaled)
    keep = updated.eigenvalues > skip_tol
    retained = SpectralBasis(
        vectors=updated.vectors[:, keep], eigenvalues=updated.eigenvalues[keep]
    )
    if retained.eigenvalues.size < dim:
        raise ValueError(
            f"only {retained.eigenvalues.size} nontrivial modes survived the update, "
            f"requested {dim} (deficit {dim - retained.eigenvalues.size})"
        )
    return retained, retained.vectors[:, :dim], retained.eigenvalues[:dim]


def fma_instance(
    X1: DataMatrix,
    X2: DataMatrix,
    pairs: list[tuple[int, int, float]],
    cfg: AlignmentConfig,
) -> AlignmentModel:
    """Instance-level alignment: a joint embedding row for every sample.

    Per-domain kNN graphs are eigendecomposed independently (dim/2 modes
    each), the correspondence incidence matrix is degree-scaled and applied as
    a low-rank update, and samples are read off the first dim updated modes.
    """
    values, transforms = _standardize_pair(X1, X2, cfg.standardize)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    graphs = [
        build_knn_graph(
            DataMatrix(values=v, domain_id=X.domain_id), cfg.k, cfg.alpha, cfg.similarity
        )
        for v, X in zip(values, (X1, X2))
    ]
    timings["graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    bases = [
        split_modes(normalized_operator(g), cfg.dim // 2, cfg.skip_tol) for g in graphs
    ]
    timings["eigensolve"] = time.perf_counter() - t0

    m1, m2 = X1.n_samples, X2.n_samples
    Phi, Lam = _assemble_blocks(bases, [m1, m2])
    incidence = build_incidence(pairs, m1, m2)
    dis = np.concatenate([inv_sqrt_degrees(g.degrees) for g in graphs])

    t0 = time.perf_counter()
    A_scaled = dis[:, None] * incidence.entries.toarray()
    retained, vecs, lam = _finish_update(Phi, Lam, A_scaled, cfg.dim, cfg.skip_tol)
    timings["update"] = time.perf_counter() - t0
    defect = projection_defect(SpectralBasis(vectors=Phi, eigenvalues=Lam), A_scaled)

    Z = dis[:, None] * vecs / np.sqrt(lam)[None, :]
    row_domain = np.array([X1.domain_id] * m1 + [X2.domain_id] * m2)
    return AlignmentModel(
        config=cfg,
        embedding=Embedding(coordinates=Z, row_domain=row_domain, dimension=cfg.dim),
        basis=retained,
        graphs=graphs,
        standardizers=transforms,
        train_values=values,
        domain_ids=(X1.domain_id, X2.domain_id),
        timings=timings,
        diagnostics={"projection_defect": defect},
    )


def _whitened_features(
    values: np.ndarray, degrees: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Factor W with (XW)^T D (XW) = I on the retained rank of X^T D X.

    Eigenvalues of the feature covariance below COV_RANK_FLOOR times the
    largest are excluded from the inverse square root instead of failing.
    """
    d = degrees + DEGREE_EPS
    C = values.T @ (d[:, None] * values)
    C = (C + C.T) / 2.0
    ev, Q = np.linalg.eigh(C)
    top = ev[-1] if ev.size else 0.0
    keep = ev > max(top, 0.0) * COV_RANK_FLOOR
    if not np.any(keep):
        raise ValueError("feature covariance has no retained rank")
    W = Q[:, keep] / np.sqrt(ev[keep])[None, :]
    return W, values @ W


def fma_feature(
    X1: DataMatrix,
    X2: DataMatrix,
    pairs: list[tuple[int, int, float]],
    cfg: AlignmentConfig,
) -> AlignmentModel:
    """Feature-level alignment: linear maps from each feature space to the joint space.

    Each domain is whitened against X^T D X, the graph problem is solved in
    whitened feature coordinates, the correspondence update is expressed in
    the same coordinates, and the resulting modes fold back into per-domain
    feature maps. Sample embeddings are X @ feature_map.
    """
    values, transforms = _standardize_pair(X1, X2, cfg.standardize)
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    graphs = [
        build_knn_graph(
            DataMatrix(values=v, domain_id=X.domain_id), cfg.k, cfg.alpha, cfg.similarity
        )
        for v, X in zip(values, (X1, X2))
    ]
    timings["graph"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    whitened = [_whitened_features(v, g.degrees) for v, g in zip(values, graphs)]
    bases = []
    for (W, Y), g in zip(whitened, graphs):
        M = Y.T @ (g.laplacian @ Y)
        bases.append(split_modes((M + M.T) / 2.0, cfg.dim // 2, cfg.skip_tol))
    timings["eigensolve"] = time.perf_counter() - t0

    m1, m2 = X1.n_samples, X2.n_samples
    ranks = [w[1].shape[1] for w in whitened]
    Phi, Lam = _assemble_blocks(bases, ranks)
    incidence = build_incidence(pairs, m1, m2)

    t0 = time.perf_counter()
    A_dense = incidence.entries.toarray()
    A_scaled = np.vstack(
        [whitened[0][1].T @ A_dense[:m1], whitened[1][1].T @ A_dense[m1:]]
    )
    retained, vecs, lam = _finish_update(Phi, Lam, A_scaled, cfg.dim, cfg.skip_tol)
    timings["update"] = time.perf_counter() - t0
    defect = projection_defect(SpectralBasis(vectors=Phi, eigenvalues=Lam), A_scaled)

    scaled = vecs / np.sqrt(lam)[None, :]
    feature_map = [
        whitened[0][0] @ scaled[: ranks[0]],
        whitened[1][0] @ scaled[ranks[0] :],
    ]
    Z = np.vstack([values[0] @ feature_map[0], values[1] @ feature_map[1]])
    row_domain = np.array([X1.domain_id] * m1 + [X2.domain_id] * m2)
    return AlignmentModel(
        config=cfg,
        embedding=Embedding(coordinates=Z, row_domain=row_domain, dimension=cfg.dim),
        basis=retained,
        graphs=graphs,
        feature_map=feature_map,
        standardizers=transforms,
        train_values=values,
        domain_ids=(X1.domain_id, X2.domain_id),
        timings=timings,
        diagnostics={"projection_defect": defect},
    )


def align(
    X1: DataMatrix,
    X2: DataMatrix,
    pairs: list[tuple[int, int, float]],
    cfg: AlignmentConfig,
) -> AlignmentModel:
    """Dispatch on cfg.mode."""
    fn = fma_instance if cfg.mode == "instance" else fma_feature
    return fn(X1, X2, pairs, cfg)


def _neighbor_edges(
    model: AlignmentModel, x_std: np.ndarray, dom: int
) -> list[tuple[int, float]]:
    """k nearest training samples of the new point, with training-style edge weights."""
    cfg = model.config
    train = model.train_values[dom]
    if callable(cfg.similarity):
        raise ValueError(
            "instance-mode inductive embedding is not available with a custom similarity hook"
        )
    if cfg.similarity == "cosine":
        nx = np.linalg.norm(x_std)
        if nx == 0:
            raise ValueError("cannot embed an all-zero vector with cosine similarity")
        norms = np.linalg.norm(train, axis=1)
        sims = (train @ x_std) / (norms * nx)
    else:
        d2 = np.sum((train - x_std[None, :]) ** 2, axis=1)
        kth = np.sort(np.sqrt(d2))[min(cfg.k, d2.size - 1)]
        sigma = max(float(kth), 1e-12)
        sims = np.exp(-d2 / (2.0 * sigma * sigma))
    order = np.lexsort((np.arange(sims.size), -sims))[: cfg.k]
    return [(int(t), cfg.alpha * float(sims[t])) for t in order if cfg.alpha * sims[t] > 0]


def embed_new_instance(model: AlignmentModel, x: np.ndarray, domain: str) -> np.ndarray:
    """Project a sample unseen during alignment into the joint space.

    Feature mode applies the stored standardization and linear map. Instance
    mode appends the sample as a fresh graph node, replays its neighbor edges
    through the spectral update on a copy of the basis, and reads the new row.
    """
    dom = model.domain_index(domain)
    x = np.asarray(x, dtype=float).ravel()
    expected = model.standardizers[dom].mean.size
    if x.size != expected:
        raise ValueError(
            f"sample has {x.size} features, domain {model.domain_ids[dom]!r} expects {expected}"
        )
    x_std = model.standardizers[dom].apply(x)

    if model.config.mode == "feature":
        return x_std @ model.feature_map[dom]

    cfg = model.config
    edges = _neighbor_edges(model, x_std, dom)
    if not edges:
        raise ValueError("new sample has no positive-weight edges to the training graph")

    m1, m2 = model.block_sizes
    m = m1 + m2
    offset = 0 if dom == 0 else m1
    d_new = sum(w for _, w in edges) + DEGREE_EPS
    dis = np.concatenate([inv_sqrt_degrees(g.degrees) for g in model.graphs])

    A = np.zeros((m + 1, len(edges)))
    for c, (t, w) in enumerate(edges):
        root = np.sqrt(w)
        A[offset + t, c] = -root * dis[offset + t]
        A[m, c] = root / np.sqrt(d_new)

    n = cfg.dim
    base_vecs = model.basis.vectors[:, :n]
    base_lam = model.basis.eigenvalues[:n]
    Phi_aug = np.zeros((m + 1, n + 1))
    Phi_aug[:m, :n] = base_vecs
    Phi_aug[m, n] = 1.0
    Lam_aug = np.concatenate([base_lam, [0.0]])
    order = np.argsort(Lam_aug, kind="stable")

    updated = block_svd_update(
        SpectralBasis(vectors=Phi_aug[:, order], eigenvalues=Lam_aug[order]), A
    )
    keep = updated.eigenvalues > cfg.skip_tol
    lam = updated.eigenvalues[keep][:n]
    vecs = updated.vectors[:, keep][:, :n]
    if lam.size < n:
        raise ValueError(f"inductive update left only {lam.size} usable modes, need {n}")
    return vecs[m] / (np.sqrt(d_new) * np.sqrt(lam))


# ---------------------------------------------------------------------------
# model serialization


def _write_matrix(path: Path, arr: np.ndarray, header: str = "") -> None:
    np.savetxt(path, np.atleast_2d(arr), delimiter=",", fmt="%.17g", header=header, comments="")


def _read_matrix(path: Path, skip_header: bool = False) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1 if skip_header else 0))


def save_model(model: AlignmentModel, out_dir: str | Path) -> Path:
    """Write the model to a directory of plain-text files.

    Loading the directory back reproduces embeddings bit for bit (floats are
    serialized with 17 significant digits).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = model.config
    if callable(cfg.similarity):
        raise ValueError("models built with a custom similarity hook are not serializable")
    lines = [
        f"k={cfg.k}",
        f"alpha={cfg.alpha!r}",
        f"dim={cfg.dim}",
        f"skip_tol={cfg.skip_tol!r}",
        f"mode={cfg.mode}",
        f"similarity={cfg.similarity}",
        f"standardize={int(cfg.standardize)}",
        f"domain_ids={model.domain_ids[0]},{model.domain_ids[1]}",
        f"block_sizes={model.block_sizes[0]},{model.block_sizes[1]}",
    ]
    (out / "config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    names = ("source", "target")
    for i, name in enumerate(names):
        _write_matrix(
            out / f"standardizer_{name}.csv",
            np.vstack([model.standardizers[i].mean, model.standardizers[i].scale]),
        )
        _write_matrix(out / f"degrees_{name}.csv", model.graphs[i].degrees)
        _write_matrix(out / f"data_{name}.csv", model.train_values[i])
        if model.feature_map is not None:
            _write_matrix(out / f"feature_map_{name}.csv", model.feature_map[i])

    header = ",".join(
        [f"z_{i}" for i in range(model.embedding.dimension)] + ["domain", "row_index"]
    )
    m1, _ = model.block_sizes
    with open(out / "embedding.csv", "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for r, row in enumerate(model.embedding.coordinates):
            cells = [f"{v:.17g}" for v in row]
            cells.append(str(model.embedding.row_domain[r]))
            cells.append(str(r if r < m1 else r - m1))
            fh.write(",".join(cells) + "\n")

    _write_matrix(out / "basis_vectors.csv", model.basis.vectors)
    _write_matrix(out / "basis_eigenvalues.csv", model.basis.eigenvalues)
    return out


def load_model(model_dir: str | Path) -> AlignmentModel:
    """Rebuild an AlignmentModel from :func:`save_model` output."""
    d = Path(model_dir)
    if not (d / "config.txt").exists():
        raise ValueError(f"{d} does not contain a model (missing config.txt)")
    raw = {}
    for line in (d / "config.txt").read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, value = line.split("=", 1)
            raw[key] = value
    cfg = AlignmentConfig(
        k=int(raw["k"]),
        alpha=float(raw["alpha"]),
        dim=int(raw["dim"]),
        skip_tol=float(raw["skip_tol"]),
        mode=raw["mode"],
        similarity=raw["similarity"],
        standardize=bool(int(raw["standardize"])),
    )
    domain_ids = tuple(raw["domain_ids"].split(","))
    m1, m2 = (int(v) for v in raw["block_sizes"].split(","))

    names = ("source", "target")
    standardizers, degrees, train_values, feature_map = [], [], [], []
    for name in names:
        ms = _read_matrix(d / f"standardizer_{name}.csv")
        standardizers.append(Standardizer(mean=ms[0], scale=ms[1]))
        degrees.append(_read_matrix(d / f"degrees_{name}.csv").ravel())
        train_values.append(_read_matrix(d / f"data_{name}.csv"))
        fm_path = d / f"feature_map_{name}.csv"
        if fm_path.exists():
            feature_map.append(_read_matrix(fm_path))

    # embedding.csv carries string domain tags; parse manually
    coords, domains = [], []
    with open(d / "embedding.csv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            cells = line.rstrip("\n").split(",")
            coords.append([float(v) for v in cells[:cfg.dim]])
            domains.append(cells[cfg.dim])
    embedding = Embedding(
        coordinates=np.array(coords), row_domain=np.array(domains), dimension=cfg.dim
    )

    basis = SpectralBasis(
        vectors=_read_matrix(d / "basis_vectors.csv"),
        eigenvalues=_read_matrix(d / "basis_eigenvalues.csv").ravel(),
    )
    graphs = [
        SimilarityGraph(
            weights=sp.csr_matrix((deg.size, deg.size)),
            degrees=deg,
            laplacian=sp.csr_matrix((deg.size, deg.size)),
        )
        for deg in degrees
    ]
    return AlignmentModel(
        config=cfg,
        embedding=embedding,
        basis=basis,
        graphs=graphs,
        feature_map=feature_map or None,
        standardizers=standardizers,
        train_values=train_values,
        domain_ids=domain_ids,
    )
