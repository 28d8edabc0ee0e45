"""Point-cloud datasets: CSV/IDX loaders, swiss-roll generator, class subsampling."""
from __future__ import annotations

import csv
import gzip
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class ParseError(ValueError):
    pass


class FormatError(ValueError):
    pass


class MismatchError(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class PointSet:
    """N x d observations with optional integer labels (-1 marks unlabeled)."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a non-empty 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

        n = pts.shape[0]
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (n,):
                raise ValueError(f"labels must have shape ({n},), got {lab.shape}")
            if not np.issubdtype(lab.dtype, np.integer):
                if not np.all(np.equal(np.mod(lab, 1), 0)):
                    raise ValueError("labels must be integers")
            lab = lab.astype(np.int64)
            if lab.min() < -1:
                raise ValueError("labels must be >= -1")
            if lab.max() + 1 < 2:
                raise ValueError("labels must span at least 2 classes")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

        ids = np.arange(n) if self.ids is None else np.asarray(self.ids)
        if ids.shape != (n,):
            raise ValueError(f"ids must have shape ({n},)")
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1

    def take(self, index) -> "PointSet":
        index = np.asarray(index)
        labels = None if self.labels is None else self.labels[index]
        return PointSet(self.points[index], labels, self.ids[index])


@dataclass(frozen=True)
class SwissRollConfig:
    n_points: int = 1000
    noise_std: float = 0.05
    sampling: str = "nonuniform"
    seed: int = 0
    t_range: tuple = field(default=(1.5 * math.pi, 4.5 * math.pi))
    height: float = 20.0

    def __post_init__(self):
        if self.n_points < 10:
            raise ValueError("n_points must be >= 10")
        if not math.isfinite(self.noise_std) or self.noise_std < 0:
            raise ValueError("noise_std must be finite and >= 0")
        if self.sampling not in ("uniform", "nonuniform"):
            raise ValueError(f"unknown sampling {self.sampling!r}")


def load_csv(path, has_label_column: bool = False, header: bool = False) -> PointSet:
    """Read a comma-separated point file; the label column, if any, is last."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        for lineno, row in enumerate(reader, start=1 + int(header)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if rows and len(values) != len(rows[0]):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: non-finite value")
    if has_label_column:
        if data.shape[1] < 2:
            raise ParseError(f"{path}: label column requested but only one column present")
        return PointSet(data[:, :-1], _as_labels(data[:, -1], path))
    return PointSet(data)


def _as_labels(col, path):
    if not np.all(col == np.round(col)):
        raise ParseError(f"{path}: label column is not integer-valued")
    return col.astype(np.int64)


def save_csv(ps: PointSet, path, digits: int = 12) -> None:
    fmt = f"%.{digits}g"
    with open(path, "w") as fh:
        for r in range(ps.n):
            cells = [fmt % v for v in ps.points[r]]
            if ps.labels is not None:
                cells.append(str(int(ps.labels[r])))
            fh.write(",".join(cells) + "\n")


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path, labels_path) -> PointSet:
    """Read an IDX image/label pair (MNIST layout); pixels are scaled to [0, 1]."""
    with _open_maybe_gzip(images_path) as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise FormatError(f"{images_path}: truncated header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise FormatError(f"{images_path}: bad magic 0x{magic:08x}")
    size = count * rows * cols
    if len(raw) - 16 < size:
        raise FormatError(f"{images_path}: truncated payload")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=size, offset=16)

    with _open_maybe_gzip(labels_path) as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise FormatError(f"{labels_path}: truncated header")
    magic, n_labels = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise FormatError(f"{labels_path}: bad magic 0x{magic:08x}")
    if len(raw) - 8 < n_labels:
        raise FormatError(f"{labels_path}: truncated payload")
    if n_labels != count:
        raise MismatchError(f"{count} images but {n_labels} labels")
    labels = np.frombuffer(raw, dtype=np.uint8, count=n_labels, offset=8)

    points = pixels.reshape(count, rows * cols).astype(float) / 255.0
    return PointSet(points, labels.astype(np.int64))


def swiss_roll_params(cfg: SwissRollConfig):
    """Manifold coordinates (t, h) drawn for ``cfg``; noise is drawn afterwards."""
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.t_range
    u = rng.random(cfg.n_points)
    if cfg.sampling == "nonuniform":
        # inverse CDF of a density proportional to 1/t
        t = lo * (hi / lo) ** u
    else:
        t = lo + (hi - lo) * u
    h = cfg.height * rng.random(cfg.n_points)
    return t, h, rng


def make_swiss_roll(cfg: SwissRollConfig) -> PointSet:
    t, h, rng = swiss_roll_params(cfg)
    pts = np.column_stack([t * np.cos(t), h, t * np.sin(t)])
    if cfg.noise_std > 0:
        pts = pts + cfg.noise_std * rng.standard_normal(pts.shape)
    return PointSet(pts)


def usps_class_counts(n_classes: int = 10) -> list[int]:
    # class c (1-indexed) gets round(2.6 c^2) samples
    return [int(math.floor(2.6 * c * c + 0.5)) for c in range(1, n_classes + 1)]


def _draw_per_class(ps: PointSet, counts, seed) -> PointSet:
    if ps.labels is None:
        raise ValueError("point set has no labels")
    rng = np.random.default_rng(seed)
    chosen = []
    for label, count in enumerate(counts):
        members = np.flatnonzero(ps.labels == label)
        if len(members) < count:
            raise InsufficientSamples(
                f"class {label} has {len(members)} points, {count} requested"
            )
        chosen.append(np.sort(rng.choice(members, size=count, replace=False)))
    return ps.take(np.concatenate(chosen))


def subsample_usps_style(ps: PointSet, seed: int = 0) -> PointSet:
    """Non-uniform class subsample: label ``c-1`` contributes round(2.6 c^2) points."""
    if ps.labels is None or ps.n_classes != 10:
        raise ValueError("expected a labeled point set with 10 classes")
    return _draw_per_class(ps, usps_class_counts(10), seed)


def subsample_per_class(ps: PointSet, per_class: int, seed: int = 0) -> PointSet:
    if ps.labels is None:
        raise ValueError("point set has no labels")
    return _draw_per_class(ps, [per_class] * ps.n_classes, seed)


def bundled_mnist_path() -> Optional[str]:
    """Location of the 5000-digit MNIST CSV shipped with ``mlxtend``, if installed."""
    try:
        import mlxtend
    except ImportError:
        return None
    path = os.path.join(os.path.dirname(mlxtend.__file__), "data", "data", "mnist_5k.csv.gz")
    return path if os.path.exists(path) else None


def load_bundled_mnist() -> PointSet:
    path = bundled_mnist_path()
    if path is None:
        raise FileNotFoundError("mlxtend's bundled MNIST sample is not available")
    data = np.loadtxt(path, delimiter=",")
    return PointSet(data[:, :-1] / 255.0, data[:, -1].astype(np.int64))
