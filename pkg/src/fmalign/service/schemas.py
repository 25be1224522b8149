"""Pydantic request/response models for the HTTP service and CLI."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class AlignmentParams(BaseModel):
    """Mirrors fmalign.align.AlignmentConfig."""

    k: int = 12
    alpha: float = 0.2
    dim: int = 40
    skip_tol: float = 1e-9
    mode: str = "instance"
    similarity: str = "cosine"
    standardize: bool = True


class AlignRequest(BaseModel):
    source_path: str | None = None
    target_path: str | None = None
    source_values: list[list[float]] | None = None
    target_values: list[list[float]] | None = None
    correspondences_path: str | None = None
    pairs: list[tuple[int, int, float]] | None = None
    label_column: str | None = None
    params: AlignmentParams = Field(default_factory=AlignmentParams)
    model_name: str = "default"
    out_dir: str | None = None

    @model_validator(mode="after")
    def _check_sources(self):
        for side in ("source", "target"):
            path = getattr(self, f"{side}_path")
            values = getattr(self, f"{side}_values")
            if (path is None) == (values is None):
                raise ValueError(f"provide exactly one of {side}_path or {side}_values")
        if (self.correspondences_path is None) == (self.pairs is None):
            raise ValueError("provide exactly one of correspondences_path or pairs")
        return self


class AlignResponse(BaseModel):
    model_name: str
    rows: int
    dim: int
    eigenvalues: list[float]
    projection_defect: float
    timings: dict[str, float]
    out_dir: str | None = None
    embedding_path: str | None = None


class ModelInfo(BaseModel):
    model_name: str
    mode: str
    dim: int
    rows: int
    domain_ids: tuple[str, str]
    eigenvalues: list[float]


class EmbedRequest(BaseModel):
    rows: list[list[float]]
    domain: str = "target"


class EmbedResponse(BaseModel):
    coordinates: list[list[float]]


class EvaluateRequest(BaseModel):
    source_path: str
    target_path: str
    label_column: str | None = None
    source_labels_path: str | None = None
    target_labels_path: str | None = None
    labeled_source: int = 20
    labeled_target: int = 3
    seed: int = 0
    splits: int = 20
    params: AlignmentParams = Field(default_factory=AlignmentParams)
    out_path: str | None = None
    task_name: str | None = None


class EvaluateResponse(BaseModel):
    task: str
    accuracy_mean: float
    accuracy_std: float
    per_split: list[float]
    wall_time: dict[str, float]
    out_path: str | None = None


class SynthRequest(BaseModel):
    manifold: str = "both"  # swiss-roll | s-curve | both
    count: int = 400
    noise: float | None = None  # None: 0.05 of the noiseless point spread
    seed: int = 0
    n_pairs: int = 40
    out_dir: str | None = None


class SynthResponse(BaseModel):
    files: list[str]
    points: dict[str, list[list[float]]] | None = None
    intrinsic: dict[str, list[float]] | None = None
    pairs: list[tuple[int, int, float]] | None = None
    noise_used: dict[str, float]


class BenchmarkRequest(BaseModel):
    suite_path: str | None = None
    methods: list[str] = ["fma_instance", "fma_feature", "sma"]
    synthetic_size: int = 600
    synthetic_features: int = 20
    seed: int = 0
    params: AlignmentParams = Field(default_factory=AlignmentParams)
    out_path: str | None = None


class BenchmarkResponse(BaseModel):
    rows: list[dict]
    out_path: str | None = None


class SweepRequest(BaseModel):
    source_path: str
    target_path: str
    label_column: str | None = None
    source_labels_path: str | None = None
    target_labels_path: str | None = None
    parameter: str
    values: list[float]
    labeled_source: int = 20
    labeled_target: int = 3
    seed: int = 0
    splits: int = 5
    params: AlignmentParams = Field(default_factory=AlignmentParams)
    out_path: str | None = None


class SweepResponse(BaseModel):
    parameter: str
    rows: list[tuple[float, float]]
    out_path: str | None = None
