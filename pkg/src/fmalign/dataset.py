"""Dataset loading, normalization, labeled splits, and synthetic manifolds."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNLABELED = -1

# Columns whose population std falls below this are treated as constant and
# mapped to zero instead of being divided by a vanishing scale.
STD_FLOOR = 1e-12


@dataclass
class DataMatrix:
    """Dense samples-by-features matrix with optional integer class labels.

    ``labels`` uses -1 (``UNLABELED``) for samples without a class.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    domain_id: str = "domain"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(
                f"non-finite entry at row {bad[0]}, column {bad[1]} in domain '{self.domain_id}'"
            )
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.values.shape[0],):
                raise ValueError(
                    f"labels length {self.labels.shape} does not match "
                    f"{self.values.shape[0]} samples"
                )

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def labeled_mask(self) -> np.ndarray:
        if self.labels is None:
            return np.zeros(self.n_samples, dtype=bool)
        return self.labels != UNLABELED


@dataclass(frozen=True)
class SplitSpec:
    """How many labeled samples to draw per class, and from which RNG stream."""

    labeled_per_class_source: int
    labeled_per_class_target: int
    seed: int = 0
    split_index: int = 0

    def __post_init__(self):
        if self.labeled_per_class_source < 1 or self.labeled_per_class_target < 1:
            raise ValueError("labeled-per-class counts must be >= 1")


@dataclass
class Standardizer:
    """Per-column centering/scaling learned from a training matrix."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.scale


def fit_standardizer(values: np.ndarray) -> Standardizer:
    """Column means and population stds; constant columns get scale 1 so they map to 0."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        raise ValueError("standardization needs at least 2 samples")
    mean = values.mean(axis=0)
    std = values.std(axis=0)  # population convention (divide by m)
    scale = np.where(std < STD_FLOOR, 1.0, std)
    return Standardizer(mean=mean, scale=scale)


def standardize(X: DataMatrix) -> DataMatrix:
    """Return a copy of X with zero-mean, unit-population-variance columns.

    Columns with (near-)zero variance become identically zero.
    """
    tr = fit_standardizer(X.values)
    return DataMatrix(values=tr.apply(X.values), labels=X.labels, domain_id=X.domain_id)


def _parse_cell(text: str, row: int, col: int, path: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(
            f"{path}: cell at row {row}, column {col} is not a number: {text!r}"
        ) from None
    if not np.isfinite(value):
        raise ValueError(f"{path}: cell at row {row}, column {col} is non-finite: {text!r}")
    return value


def load_csv(
    path: str | Path,
    label_column: str | None = None,
    labels_path: str | Path | None = None,
    domain_id: str | None = None,
) -> DataMatrix:
    """Load a UTF-8 comma-separated feature file.

    An optional single header row is detected automatically (any cell of the
    first row that does not parse as a number). ``label_column`` names a header
    column holding integer class labels; alternatively ``labels_path`` points
    to a sidecar file with one integer per line.
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: file is empty")

    header = None
    first = rows[0]
    numeric_first = True
    for cell in first:
        try:
            float(cell)
        except ValueError:
            numeric_first = False
            break
    if not numeric_first:
        header = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header but no data rows")

    label_idx = None
    if label_column is not None:
        if header is None:
            raise ValueError(f"{path}: label column {label_column!r} requires a header row")
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r} in header {header}")
        label_idx = header.index(label_column)

    arity = len(rows[0])
    data = []
    labels = [] if label_idx is not None else None
    for r, row in enumerate(rows):
        if len(row) != arity:
            raise ValueError(
                f"{path}: ragged row {r}: expected {arity} cells, got {len(row)}"
            )
        vals = []
        for c, cell in enumerate(row):
            if c == label_idx:
                labels.append(int(_parse_cell(cell, r, c, str(path))))
            else:
                vals.append(_parse_cell(cell, r, c, str(path)))
        data.append(vals)

    if labels_path is not None:
        if labels is not None:
            raise ValueError("pass either label_column or labels_path, not both")
        labels = load_label_sidecar(labels_path, expected=len(data))

    return DataMatrix(
        values=np.array(data, dtype=float),
        labels=np.array(labels, dtype=int) if labels is not None else None,
        domain_id=domain_id or path.stem,
    )


def load_label_sidecar(path: str | Path, expected: int | None = None) -> np.ndarray:
    """One integer label per line; -1 marks an unlabeled sample."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    try:
        labels = np.array([int(ln) for ln in lines], dtype=int)
    except ValueError as exc:
        raise ValueError(f"{path}: labels must be integers ({exc})") from None
    if expected is not None and labels.size != expected:
        raise ValueError(f"{path}: {labels.size} labels for {expected} samples")
    return labels


def _class_indices(X: DataMatrix, which: str) -> dict[int, np.ndarray]:
    if X.labels is None:
        raise ValueError(f"{which} dataset has no labels")
    out = {}
    for cls in np.unique(X.labels[X.labels != UNLABELED]):
        out[int(cls)] = np.flatnonzero(X.labels == cls)
    if not out:
        raise ValueError(f"{which} dataset has no labeled samples")
    return out


def _draw_per_class(
    classes: dict[int, np.ndarray], count: int, rng: np.random.Generator, which: str
) -> dict[int, np.ndarray]:
    picked = {}
    for cls in sorted(classes):
        idx = classes[cls]
        if idx.size < count:
            raise ValueError(
                f"class {cls} in {which} domain has {idx.size} samples, "
                f"cannot draw {count} labeled"
            )
        # permutation keeps the sampling path integer-only
        picked[cls] = np.sort(idx[rng.permutation(idx.size)[:count]])
    return picked


def make_split(
    X_src: DataMatrix, X_tgt: DataMatrix, spec: SplitSpec
) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Draw labeled index sets per class for both domains.

    Reproducible from (seed, split_index) alone via a counter-based Philox
    stream, so split k never depends on splits 0..k-1.
    """
    rng = np.random.Generator(
        np.random.Philox(key=np.array([spec.seed, spec.split_index], dtype=np.uint64))
    )
    src = _draw_per_class(_class_indices(X_src, "source"), spec.labeled_per_class_source, rng, "source")
    tgt = _draw_per_class(_class_indices(X_tgt, "target"), spec.labeled_per_class_target, rng, "target")
    return src, tgt


SWISS_T_RANGE = (1.5 * np.pi, 4.5 * np.pi)
SWISS_HEIGHT = 5.0
SCURVE_T_RANGE = (-1.5 * np.pi, 1.5 * np.pi)
SCURVE_HEIGHT = 2.0


def make_swiss_roll(
    count: int, noise: float = 0.0, seed: int = 0, domain_id: str = "swiss_roll"
) -> tuple[DataMatrix, np.ndarray]:
    """Sample the surface (t cos t, h, t sin t) with isotropic Gaussian noise.

    Returns the 3-D points and the intrinsic coordinate t per sample
    (rank-equivalent to arc length along the roll).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    lo, hi = SWISS_T_RANGE
    t = lo + (hi - lo) * rng.random(count)
    h = SWISS_HEIGHT * rng.random(count)
    pts = np.stack([t * np.cos(t), h, t * np.sin(t)], axis=1)
    if noise > 0:
        pts = pts + noise * rng.standard_normal(pts.shape)
    return DataMatrix(values=pts, domain_id=domain_id), t


def make_s_curve(
    count: int, noise: float = 0.0, seed: int = 0, domain_id: str = "s_curve"
) -> tuple[DataMatrix, np.ndarray]:
    """Sample the surface (sin t, h, sign(t)(cos t - 1)); intrinsic coordinate is t.

    For this surface t is exactly the arc length up to an offset.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    lo, hi = SCURVE_T_RANGE
    t = lo + (hi - lo) * rng.random(count)
    h = SCURVE_HEIGHT * rng.random(count)
    pts = np.stack([np.sin(t), h, np.sign(t) * (np.cos(t) - 1.0)], axis=1)
    if noise > 0:
        pts = pts + noise * rng.standard_normal(pts.shape)
    return DataMatrix(values=pts, domain_id=domain_id), t
