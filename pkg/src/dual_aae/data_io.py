"""Dataset ingestion: IDX image files, feature CSVs, and a synthetic
Gaussian-mixture generator for desk-scale runs.

Labels ride along in the Dataset for evaluation only; nothing on the
training/loss path consumes them.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray           # (n, d) float64
    labels: np.ndarray | None      # (n,) int64, evaluation only
    data_mode: str                 # "pixel" | "feature"
    name: str = ""
    image_shape: tuple | None = None   # (rows, cols) when loaded from images

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise DataFormatError("features must be a 2-d matrix")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.features.shape[0],):
                raise DataFormatError("labels must be one integer per row")
            if self.labels.size and self.labels.min() < 0:
                raise DataFormatError("labels must be nonnegative")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _read_exact(f, count, what):
    buf = f.read(count)
    if len(buf) != count:
        raise DataFormatError(f"truncated IDX file: expected {count} bytes of "
                              f"{what}, got {len(buf)}")
    return buf


def read_idx(path):
    """Parse one IDX file (big-endian magic, dims, unsigned-byte payload)."""
    with open(path, "rb") as f:
        magic = struct.unpack(">I", _read_exact(f, 4, "magic"))[0]
        if magic == IDX_MAGIC_IMAGES:
            n, rows, cols = struct.unpack(">III", _read_exact(f, 12, "dims"))
            payload = _read_exact(f, n * rows * cols, "pixels")
            data = np.frombuffer(payload, dtype=np.uint8).reshape(n, rows, cols)
            if f.read(1):
                raise DataFormatError(f"trailing bytes after IDX payload in {path}")
            return data
        if magic == IDX_MAGIC_LABELS:
            n = struct.unpack(">I", _read_exact(f, 4, "count"))[0]
            payload = _read_exact(f, n, "labels")
            if f.read(1):
                raise DataFormatError(f"trailing bytes after IDX payload in {path}")
            return np.frombuffer(payload, dtype=np.uint8)
        raise DataFormatError(
            f"bad IDX magic 0x{magic:08x} in {path}: expected "
            f"0x{IDX_MAGIC_IMAGES:08x} (images) or 0x{IDX_MAGIC_LABELS:08x} "
            f"(labels)")


def load_idx(images_path, labels_path=None, limit=None, name="idx") -> Dataset:
    """Load an IDX image file (and optional label file) as a pixel-mode
    dataset: bytes scaled by 1/255 into [0, 1] and flattened per image."""
    images = read_idx(images_path)
    if images.ndim != 3:
        raise DataFormatError(f"{images_path} is not an image IDX file")
    n, rows, cols = images.shape
    labels = None
    if labels_path is not None:
        labels = read_idx(labels_path)
        if labels.ndim != 1:
            raise DataFormatError(f"{labels_path} is not a label IDX file")
        if labels.shape[0] != n:
            raise DataFormatError(
                f"image/label counts differ: {n} vs {labels.shape[0]}")
    if limit is not None:
        images = images[:limit]
        labels = labels[:limit] if labels is not None else None
    features = images.reshape(images.shape[0], rows * cols).astype(np.float64)
    features /= 255.0
    return Dataset(features=features, labels=labels, data_mode="pixel",
                   name=name, image_shape=(rows, cols))


def load_features_csv(path, has_labels=False, limit=None, name="csv") -> Dataset:
    """Load a feature CSV ('.' decimal, ',' separator); an optional final
    integer column holds labels."""
    rows = []
    labels = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if width is None:
                width = len(row)
                if has_labels and width < 2:
                    raise DataFormatError(
                        f"{path}:{lineno}: need at least one feature column "
                        "before the label column")
            elif len(row) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: ragged row ({len(row)} cells, "
                    f"expected {width})")
            try:
                values = [float(c) for c in row]
            except ValueError as e:
                raise DataFormatError(f"{path}:{lineno}: non-numeric cell "
                                      f"({e})") from None
            if not all(np.isfinite(v) for v in values):
                raise DataFormatError(f"{path}:{lineno}: non-finite cell")
            if has_labels:
                label = values[-1]
                if label != int(label):
                    raise DataFormatError(
                        f"{path}:{lineno}: label column must be integer, "
                        f"got {row[-1]}")
                labels.append(int(label))
                values = values[:-1]
            rows.append(values)
            if limit is not None and len(rows) >= limit:
                break
    if not rows:
        raise DataFormatError(f"{path}: empty CSV")
    return Dataset(features=np.array(rows, dtype=np.float64),
                   labels=np.array(labels, dtype=np.int64) if has_labels else None,
                   data_mode="feature", name=name)


def write_features_csv(path, features, labels=None) -> None:
    """Write features (and optional labels) as CSV; floats use repr so a
    read-back reproduces them exactly."""
    features = np.asarray(features, dtype=np.float64)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for i, row in enumerate(features):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)


def synth_gmm(k, dim, n_per_cluster, separation, cluster_std, seed,
              data_mode="feature") -> Dataset:
    """Separable Gaussian mixture: cluster j's mean sits at
    separation * (1 + j // dim) on coordinate j % dim, so means stay distinct
    when k exceeds dim. Pixel mode min-max scales features into [0, 1]."""
    if k < 1 or dim < 1:
        raise ConfigError("synth_gmm needs k >= 1 and dim >= 1")
    if data_mode not in ("pixel", "feature"):
        raise ConfigError(f"unknown data_mode {data_mode!r}")
    rng = np.random.default_rng(seed)
    means = np.zeros((k, dim))
    for j in range(k):
        means[j, j % dim] = separation * (1 + j // dim)
    features = np.repeat(means, n_per_cluster, axis=0)
    features = features + cluster_std * rng.standard_normal(features.shape)
    labels = np.repeat(np.arange(k, dtype=np.int64), n_per_cluster)
    if data_mode == "pixel":
        features = scale_unit(features)
    return Dataset(features=features, labels=labels, data_mode=data_mode,
                   name=f"synth_gmm(k={k},dim={dim},seed={seed})")


def scale_unit(features) -> np.ndarray:
    """Per-feature min-max scaling into [0, 1]; constant columns map to 0."""
    features = np.asarray(features, dtype=np.float64)
    if features.size == 0:
        raise DataFormatError("scale_unit of an empty matrix")
    lo = features.min(axis=0)
    hi = features.max(axis=0)
    span = hi - lo
    span[span == 0.0] = 1.0
    return (features - lo) / span
