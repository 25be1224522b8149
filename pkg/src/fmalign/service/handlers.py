"""Request handlers shared by the FastAPI routes and the CLI.

Each handler takes a pydantic request, drives the core package, and reports a
pydantic response; failures carry the name of the stage that raised.
"""

from __future__ import annotations

import contextlib
import csv
from pathlib import Path

import numpy as np

from ..align import AlignmentConfig, AlignmentModel, align, embed_new_instance, save_model
from ..dataset import DataMatrix, SplitSpec, load_csv, make_s_curve, make_split, make_swiss_roll
from ..evaluation import (
    BenchmarkTask,
    benchmark_runtime,
    evaluate_task,
    parse_suite,
    rank_pairing,
    sweep,
    synthetic_labeled_pair,
)
from ..graph import correspondences_from_labels, load_correspondences_csv
from . import schemas


class StageError(RuntimeError):
    """An operation failed; ``stage`` names where."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _config(params: schemas.AlignmentParams) -> AlignmentConfig:
    return AlignmentConfig(
        k=params.k,
        alpha=params.alpha,
        dim=params.dim,
        skip_tol=params.skip_tol,
        mode=params.mode,
        similarity=params.similarity,
        standardize=params.standardize,
    )


def _load_side(path, values, label_column, tag) -> DataMatrix:
    if path is not None:
        return load_csv(path, label_column=label_column, domain_id=tag)
    return DataMatrix(values=np.asarray(values, dtype=float), domain_id=tag)


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


class ModelRegistry:
    """In-memory store of trained alignment models, keyed by name."""

    def __init__(self):
        self._models: dict[str, AlignmentModel] = {}

    def put(self, name: str, model: AlignmentModel) -> None:
        self._models[name] = model

    def get(self, name: str) -> AlignmentModel:
        if name not in self._models:
            raise KeyError(f"no model named {name!r}; trained models: {sorted(self._models)}")
        return self._models[name]

    def names(self) -> list[str]:
        return sorted(self._models)


def handle_align(
    req: schemas.AlignRequest, registry: ModelRegistry | None = None
) -> tuple[schemas.AlignResponse, AlignmentModel]:
    with _stage("loading inputs"):
        X1 = _load_side(req.source_path, req.source_values, req.label_column, "source")
        X2 = _load_side(req.target_path, req.target_values, req.label_column, "target")
        if req.correspondences_path is not None:
            pairs = load_correspondences_csv(req.correspondences_path)
        else:
            pairs = [tuple(p) for p in req.pairs]
        cfg = _config(req.params)
    with _stage("aligning"):
        model = align(X1, X2, pairs, cfg)
    out_dir = None
    embedding_path = None
    if req.out_dir is not None:
        with _stage("writing outputs"):
            out_dir = str(save_model(model, req.out_dir))
            embedding_path = str(Path(out_dir) / "embedding.csv")
    if registry is not None:
        registry.put(req.model_name, model)
    response = schemas.AlignResponse(
        model_name=req.model_name,
        rows=model.embedding.coordinates.shape[0],
        dim=model.embedding.dimension,
        eigenvalues=[float(v) for v in model.basis.eigenvalues[: cfg.dim]],
        projection_defect=model.diagnostics.get("projection_defect", 0.0),
        timings=model.timings,
        out_dir=out_dir,
        embedding_path=embedding_path,
    )
    return response, model


def model_info(name: str, model: AlignmentModel) -> schemas.ModelInfo:
    return schemas.ModelInfo(
        model_name=name,
        mode=model.config.mode,
        dim=model.embedding.dimension,
        rows=model.embedding.coordinates.shape[0],
        domain_ids=model.domain_ids,
        eigenvalues=[float(v) for v in model.basis.eigenvalues[: model.config.dim]],
    )


def handle_embed(req: schemas.EmbedRequest, model: AlignmentModel) -> schemas.EmbedResponse:
    with _stage("embedding new samples"):
        coords = [
            [float(v) for v in embed_new_instance(model, np.asarray(row, dtype=float), req.domain)]
            for row in req.rows
        ]
    return schemas.EmbedResponse(coordinates=coords)


def handle_evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
    with _stage("loading inputs"):
        X_src = load_csv(
            req.source_path,
            label_column=req.label_column,
            labels_path=req.source_labels_path,
            domain_id="source",
        )
        X_tgt = load_csv(
            req.target_path,
            label_column=req.label_column,
            labels_path=req.target_labels_path,
            domain_id="target",
        )
        cfg = _config(req.params)
        spec = SplitSpec(
            labeled_per_class_source=req.labeled_source,
            labeled_per_class_target=req.labeled_target,
            seed=req.seed,
        )
    with _stage("evaluating"):
        result = evaluate_task(
            X_src, X_tgt, spec, cfg, splits=req.splits, task_name=req.task_name
        )
    out_path = None
    if req.out_path is not None:
        with _stage("writing outputs"):
            rows = [
                [result.task, cfg.mode, s, f"{acc:.17g}"]
                + [f"{result.wall_time[p]:.6f}" for p in ("graph", "eigensolve", "update", "classify")]
                for s, acc in enumerate(result.per_split)
            ]
            _write_rows(
                Path(req.out_path),
                ["task", "method", "split", "accuracy", "graph_s", "eigensolve_s", "update_s", "classify_s"],
                rows,
            )
            out_path = req.out_path
    return schemas.EvaluateResponse(
        task=result.task,
        accuracy_mean=result.accuracy_mean,
        accuracy_std=result.accuracy_std,
        per_split=result.per_split,
        wall_time=result.wall_time,
        out_path=out_path,
    )


_MANIFOLDS = {"swiss-roll": make_swiss_roll, "s-curve": make_s_curve}


def handle_synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    with _stage("generating"):
        if req.manifold == "both":
            names = ["swiss-roll", "s-curve"]
        elif req.manifold in _MANIFOLDS:
            names = [req.manifold]
        else:
            raise ValueError(
                f"unknown manifold {req.manifold!r}; choose swiss-roll, s-curve, or both"
            )
        points, intrinsic, noise_used = {}, {}, {}
        for offset, name in enumerate(names):
            gen = _MANIFOLDS[name]
            seed = req.seed + offset
            if req.noise is None:
                base, _ = gen(req.count, 0.0, seed)
                sigma = 0.05 * float(base.values.std())
            else:
                sigma = float(req.noise)
            X, t = gen(req.count, sigma, seed)
            points[name] = X.values.tolist()
            intrinsic[name] = t.tolist()
            noise_used[name] = sigma
        pairs = None
        if len(names) == 2:
            pairs = rank_pairing(
                np.array(intrinsic[names[0]]), np.array(intrinsic[names[1]]), req.n_pairs
            )

    files = []
    if req.out_dir is not None:
        with _stage("writing outputs"):
            out = Path(req.out_dir)
            for name in names:
                stem = name.replace("-", "_")
                pts_path = out / f"{stem}.csv"
                _write_rows(
                    pts_path,
                    ["x0", "x1", "x2"],
                    [[f"{v:.17g}" for v in row] for row in points[name]],
                )
                intr_path = out / f"{stem}_intrinsic.csv"
                _write_rows(intr_path, ["t"], [[f"{v:.17g}"] for v in intrinsic[name]])
                files.extend([str(pts_path), str(intr_path)])
            if pairs is not None:
                pair_path = out / "pairs.csv"
                _write_rows(
                    pair_path,
                    ["src_index", "tgt_index", "weight"],
                    [[i, j, f"{w:.17g}"] for i, j, w in pairs],
                )
                files.append(str(pair_path))
    return schemas.SynthResponse(
        files=files,
        points=points,
        intrinsic=intrinsic,
        pairs=pairs,
        noise_used=noise_used,
    )


def handle_benchmark(req: schemas.BenchmarkRequest) -> schemas.BenchmarkResponse:
    with _stage("loading inputs"):
        cfg = _config(req.params)
        tasks = []
        if req.suite_path is not None:
            for st in parse_suite(req.suite_path):
                X_src = load_csv(st.source, label_column=st.label_column,
                                 labels_path=st.labels_source, domain_id="source")
                X_tgt = load_csv(st.target, label_column=st.label_column,
                                 labels_path=st.labels_target, domain_id="target")
                spec = SplitSpec(st.labeled_source, st.labeled_target, seed=req.seed)
                src_sel, tgt_sel = make_split(X_src, X_tgt, spec)
                src_idx = np.concatenate([src_sel[c] for c in sorted(src_sel)])
                tgt_idx = np.concatenate([tgt_sel[c] for c in sorted(tgt_sel)])
                pairs = correspondences_from_labels(
                    src_idx, X_src.labels[src_idx], tgt_idx, X_tgt.labels[tgt_idx]
                )
                tasks.append(BenchmarkTask(st.name, X_src, X_tgt, pairs))
        else:
            m = req.synthetic_size
            X_src, X_tgt = synthetic_labeled_pair(
                m, m, n_features_src=req.synthetic_features,
                n_features_tgt=req.synthetic_features, seed=req.seed,
            )
            rng = np.random.default_rng(req.seed)
            idx = rng.permutation(m)[:40]
            pairs = [(int(i), int(i), 1.0) for i in idx]
            tasks.append(BenchmarkTask(f"synthetic_{m}x{req.synthetic_features}", X_src, X_tgt, pairs))
    with _stage("benchmarking"):
        rows = benchmark_runtime(tasks, req.methods, cfg)
    out_path = None
    if req.out_path is not None:
        with _stage("writing outputs"):
            _write_rows(
                Path(req.out_path),
                ["task", "method", "seconds"],
                [[r["task"], r["method"], f"{r['seconds']:.6f}"] for r in rows],
            )
            out_path = req.out_path
    return schemas.BenchmarkResponse(rows=rows, out_path=out_path)


def handle_sweep(req: schemas.SweepRequest) -> schemas.SweepResponse:
    with _stage("loading inputs"):
        X_src = load_csv(req.source_path, label_column=req.label_column,
                         labels_path=req.source_labels_path, domain_id="source")
        X_tgt = load_csv(req.target_path, label_column=req.label_column,
                         labels_path=req.target_labels_path, domain_id="target")
        cfg = _config(req.params)
        spec = SplitSpec(req.labeled_source, req.labeled_target, seed=req.seed)
    with _stage("sweeping"):
        rows = sweep(req.parameter, req.values, X_src, X_tgt, spec, cfg, splits=req.splits)
    out_path = None
    if req.out_path is not None:
        with _stage("writing outputs"):
            _write_rows(
                Path(req.out_path),
                [req.parameter, "accuracy_mean"],
                [[f"{v:.17g}", f"{a:.17g}"] for v, a in rows],
            )
            out_path = req.out_path
    return schemas.SweepResponse(parameter=req.parameter, rows=rows, out_path=out_path)
