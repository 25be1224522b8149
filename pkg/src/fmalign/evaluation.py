"""Downstream classification, the split-evaluation protocol, parameter sweeps,
and runtime benchmarking."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.optimize

from .align import AlignmentConfig, AlignmentModel, align
from .dataset import DataMatrix, SplitSpec, make_s_curve, make_split, make_swiss_roll
from .graph import build_incidence, build_knn_graph, correspondences_from_labels
from .spectral import sma_solve

DEFAULT_L2 = 1e-4
DEFAULT_MAX_ITER = 500
DEFAULT_GRAD_TOL = 1e-6


@dataclass
class ClassifierModel:
    """Multinomial logistic weights, (dim+1) x classes with the bias in the last row."""

    weights: np.ndarray
    classes: np.ndarray


@dataclass
class ExperimentResult:
    task: str
    accuracy_mean: float
    accuracy_std: float
    per_split: list[float]
    wall_time: dict[str, float] = field(default_factory=dict)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train_logistic(
    Z: np.ndarray,
    labels: np.ndarray,
    l2: float = DEFAULT_L2,
    max_iter: int = DEFAULT_MAX_ITER,
    grad_tol: float = DEFAULT_GRAD_TOL,
    trace: list | None = None,
) -> ClassifierModel:
    """Fit a softmax classifier by full-batch L-BFGS on the cross-entropy.

    The objective is mean categorical cross-entropy plus an L2 penalty on the
    non-bias weights; optimization stops at gradient max-norm < grad_tol or
    max_iter iterations. Deterministic (zero start, no sampling).
    """
    Z = np.asarray(Z, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError(f"need at least 2 classes, got {classes.size}")
    m, d = Z.shape
    c = classes.size
    Xb = np.hstack([Z, np.ones((m, 1))])
    Y = (labels[:, None] == classes[None, :]).astype(float)

    def objective(flat):
        W = flat.reshape(d + 1, c)
        P = _softmax(Xb @ W)
        ce = -np.sum(Y * np.log(np.maximum(P, 1e-300))) / m
        penalty = 0.5 * l2 * np.sum(W[:-1] ** 2)
        grad = Xb.T @ (P - Y) / m
        grad[:-1] += l2 * W[:-1]
        return ce + penalty, grad.ravel()

    callback = None
    if trace is not None:
        callback = lambda flat: trace.append(objective(flat)[0])

    res = scipy.optimize.minimize(
        objective,
        np.zeros((d + 1) * c),
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={"maxiter": max_iter, "gtol": grad_tol, "ftol": 1e-16},
    )
    W = res.x.reshape(d + 1, c)
    if not np.all(np.isfinite(W)):
        raise ValueError("classifier weights are not finite")
    return ClassifierModel(weights=W, classes=classes)


def predict_logistic(model: ClassifierModel, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    scores = np.hstack([Z, np.ones((Z.shape[0], 1))]) @ model.weights
    return model.classes[np.argmax(scores, axis=1)]


def accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    return float(np.mean(pred == truth))


@dataclass
class SplitOutcome:
    predictions: np.ndarray
    model: AlignmentModel
    classify_time: float


def run_split(
    X_src: DataMatrix,
    X_tgt: DataMatrix,
    split: SplitSpec,
    cfg: AlignmentConfig,
    l2: float = DEFAULT_L2,
    selections: tuple[dict, dict] | None = None,
) -> SplitOutcome:
    """One protocol round: correspondences from the labeled subsets, align,
    train on labeled source embeddings only, predict every target sample.

    Once the labeled subsets are drawn, target labels are consumed solely when
    building correspondences; the classifier never sees them. ``selections``
    injects pre-drawn labeled index sets instead of drawing from ``split``.
    """
    src_sel, tgt_sel = selections if selections is not None else make_split(X_src, X_tgt, split)
    src_idx = np.concatenate([src_sel[c] for c in sorted(src_sel)])
    tgt_idx = np.concatenate([tgt_sel[c] for c in sorted(tgt_sel)])
    pairs = correspondences_from_labels(
        src_idx, X_src.labels[src_idx], tgt_idx, X_tgt.labels[tgt_idx]
    )
    model = align(X_src, X_tgt, pairs, cfg)

    Z = model.embedding.coordinates
    m1 = X_src.n_samples
    t0 = time.perf_counter()
    clf = train_logistic(Z[src_idx], X_src.labels[src_idx], l2=l2)
    predictions = predict_logistic(clf, Z[m1:])
    classify_time = time.perf_counter() - t0
    return SplitOutcome(predictions=predictions, model=model, classify_time=classify_time)


def evaluate_task(
    X_src: DataMatrix,
    X_tgt: DataMatrix,
    spec: SplitSpec,
    cfg: AlignmentConfig,
    splits: int = 20,
    l2: float = DEFAULT_L2,
    task_name: str | None = None,
) -> ExperimentResult:
    """Average target accuracy over randomized labeled splits."""
    if X_tgt.labels is None:
        raise ValueError("target dataset needs labels for scoring")
    accs = []
    phases = {"graph": 0.0, "eigensolve": 0.0, "update": 0.0, "classify": 0.0}
    for s in range(splits):
        split = dataclasses.replace(spec, split_index=s)
        outcome = run_split(X_src, X_tgt, split, cfg, l2=l2)
        accs.append(accuracy(outcome.predictions, X_tgt.labels))
        for phase in ("graph", "eigensolve", "update"):
            phases[phase] += outcome.model.timings.get(phase, 0.0)
        phases["classify"] += outcome.classify_time
    accs_arr = np.array(accs)
    return ExperimentResult(
        task=task_name or f"{X_src.domain_id}->{X_tgt.domain_id}",
        accuracy_mean=float(accs_arr.mean()),
        accuracy_std=float(accs_arr.std()),
        per_split=accs,
        wall_time=phases,
    )


SWEEPABLE = ("dim", "k", "alpha", "labeled_per_class_source", "labeled_per_class_target")


def sweep(
    parameter: str,
    values: list,
    X_src: DataMatrix,
    X_tgt: DataMatrix,
    spec: SplitSpec,
    cfg: AlignmentConfig,
    splits: int = 5,
) -> list[tuple[float, float]]:
    """Grid over one parameter, everything else fixed; returns (value, mean accuracy) rows."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEPABLE}")
    rows = []
    for value in values:
        if parameter in ("dim", "k"):
            cfg_v = dataclasses.replace(cfg, **{parameter: int(value)})
            spec_v = spec
        elif parameter == "alpha":
            cfg_v = dataclasses.replace(cfg, alpha=float(value))
            spec_v = spec
        else:
            cfg_v = cfg
            spec_v = dataclasses.replace(spec, **{parameter: int(value)})
        result = evaluate_task(X_src, X_tgt, spec_v, cfg_v, splits=splits)
        rows.append((float(value), result.accuracy_mean))
    return rows


@dataclass
class BenchmarkTask:
    name: str
    X_src: DataMatrix
    X_tgt: DataMatrix
    pairs: list[tuple[int, int, float]]


def benchmark_runtime(
    tasks: list[BenchmarkTask],
    methods: list[str],
    cfg: AlignmentConfig,
) -> list[dict]:
    """Cold-start wall time per (task, method); sequential execution."""
    rows = []
    for task in tasks:
        for method in methods:
            t0 = time.perf_counter()
            if method == "fma_instance":
                align(task.X_src, task.X_tgt, task.pairs, dataclasses.replace(cfg, mode="instance"))
            elif method == "fma_feature":
                align(task.X_src, task.X_tgt, task.pairs, dataclasses.replace(cfg, mode="feature"))
            elif method == "sma":
                g1 = build_knn_graph(task.X_src, cfg.k, cfg.alpha, cfg.similarity)
                g2 = build_knn_graph(task.X_tgt, cfg.k, cfg.alpha, cfg.similarity)
                A = build_incidence(task.pairs, task.X_src.n_samples, task.X_tgt.n_samples)
                sma_solve(g1, g2, A, cfg.dim, cfg.skip_tol)
            else:
                raise ValueError(f"unknown method {method!r}")
            rows.append({"task": task.name, "method": method, "seconds": time.perf_counter() - t0})
    return rows


# ---------------------------------------------------------------------------
# synthetic tasks


def rank_pairing(t_src: np.ndarray, t_tgt: np.ndarray, count: int) -> list[tuple[int, int, float]]:
    """Pair samples occupying the same rank along their intrinsic coordinates."""
    n = min(t_src.size, t_tgt.size)
    ranks = np.linspace(0, n - 1, count).astype(int)
    by_rank_src = np.argsort(t_src, kind="stable")
    by_rank_tgt = np.argsort(t_tgt, kind="stable")
    return [(int(by_rank_src[q]), int(by_rank_tgt[q]), 1.0) for q in ranks]


def manifold_pair_task(
    count: int = 400,
    n_pairs: int = 40,
    noise_rel: float = 0.05,
    seed: int = 3,
) -> tuple[DataMatrix, np.ndarray, DataMatrix, np.ndarray, list[tuple[int, int, float]]]:
    """Swiss roll and S-curve samples with rank-matched correspondences.

    Noise is expressed relative to the spread of the noiseless point cloud.
    """
    base_s, _ = make_swiss_roll(count, 0.0, seed)
    base_c, _ = make_s_curve(count, 0.0, seed + 1)
    X_s, t_s = make_swiss_roll(count, noise_rel * float(base_s.values.std()), seed)
    X_c, t_c = make_s_curve(count, noise_rel * float(base_c.values.std()), seed + 1)
    pairs = rank_pairing(t_s, t_c, n_pairs)
    return X_s, t_s, X_c, t_c, pairs


def synthetic_labeled_pair(
    m_src: int,
    m_tgt: int,
    n_classes: int = 4,
    n_features_src: int = 12,
    n_features_tgt: int = 18,
    latent_dim: int = 6,
    noise: float = 0.25,
    class_sep: float = 3.0,
    seed: int = 0,
) -> tuple[DataMatrix, DataMatrix]:
    """Two labeled domains generated as different linear views of shared class blobs."""
    rng = np.random.default_rng(seed)
    centers = class_sep * rng.standard_normal((n_classes, latent_dim))
    map_src = rng.standard_normal((latent_dim, n_features_src))
    map_tgt = rng.standard_normal((latent_dim, n_features_tgt))

    def domain(m, mapping, n_features, tag):
        # balanced classes so split protocols are always satisfiable
        labels = np.resize(np.arange(n_classes), m)
        labels = labels[rng.permutation(m)]
        latent = centers[labels] + 0.5 * rng.standard_normal((m, latent_dim))
        values = latent @ mapping + noise * rng.standard_normal((m, n_features))
        return DataMatrix(values=values, labels=labels, domain_id=tag)

    return domain(m_src, map_src, n_features_src, "synth_src"), domain(
        m_tgt, map_tgt, n_features_tgt, "synth_tgt"
    )


# ---------------------------------------------------------------------------
# suite files


@dataclass
class SuiteTask:
    name: str
    source: str
    target: str
    label_column: str | None = None
    labels_source: str | None = None
    labels_target: str | None = None
    labeled_source: int = 20
    labeled_target: int = 3


def parse_suite(path: str | Path) -> list[SuiteTask]:
    """Plain-text suite: one task per line, "name key=value ...", # comments."""
    tasks = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        kwargs = {"name": tokens[0]}
        for token in tokens[1:]:
            if "=" not in token:
                raise ValueError(f"suite line {lineno}: expected key=value, got {token!r}")
            key, value = token.split("=", 1)
            if key in ("labeled_source", "labeled_target"):
                kwargs[key] = int(value)
            elif key in ("source", "target", "label_column", "labels_source", "labels_target"):
                kwargs[key] = value
            else:
                raise ValueError(f"suite line {lineno}: unknown key {key!r}")
        if "source" not in kwargs or "target" not in kwargs:
            raise ValueError(f"suite line {lineno}: source= and target= are required")
        tasks.append(SuiteTask(**kwargs))
    return tasks
