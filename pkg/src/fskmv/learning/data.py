"""Datasets, IDX ingestion and the IID / location-dependent partitions."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fskmv.geometry import CellConfig, ring_index

# IDX type byte -> numpy dtype (big-endian where it matters)
_IDX_TYPES = {
    0x08: np.dtype(np.uint8),
    0x09: np.dtype(np.int8),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    n_classes: int = 10

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.x.shape}")
        if len(self.x) != len(self.y):
            raise ValueError(f"{len(self.x)} samples but {len(self.y)} labels")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[idx], self.y[idx], self.n_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)


def make_blobs(
    n_per_class: int,
    centers: np.ndarray,
    rng: np.random.Generator,
    noise_std: float = 1.0,
) -> Dataset:
    """Isotropic Gaussian clusters around ``centers`` (one row per class), class-balanced."""
    n_classes, dim = centers.shape
    y = np.repeat(np.arange(n_classes), n_per_class)
    x = centers[y] + noise_std * rng.standard_normal((y.size, dim))
    return Dataset(x, y, n_classes)


def synthetic_task(
    rng: np.random.Generator,
    n_train_per_class: int,
    n_test_per_class: int,
    dim: int = 16,
    n_classes: int = 10,
    center_scale: float = 1.0,
    noise_std: float = 1.0,
) -> tuple[Dataset, Dataset]:
    """Train/test split of a Gaussian-blob classification task with shared centers."""
    centers = center_scale * rng.standard_normal((n_classes, dim))
    train = make_blobs(n_train_per_class, centers, rng, noise_std)
    test = make_blobs(n_test_per_class, centers, rng, noise_std)
    return train, test


def read_idx(path) -> np.ndarray:
    """Read an IDX file (optionally gzipped) into an array of its stored shape."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise ValueError(f"{path}: not an IDX file")
    type_code, ndim = raw[2], raw[3]
    if type_code not in _IDX_TYPES:
        raise ValueError(f"{path}: unknown IDX type 0x{type_code:02x}")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    dtype = _IDX_TYPES[type_code]
    count = int(np.prod(dims)) if dims else 1
    offset = 4 + 4 * ndim
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def write_idx(path, array) -> None:
    """Write ``array`` as an IDX file; used for fixtures and round trips."""
    arr = np.asarray(array)
    codes = {np.dtype(v).newbyteorder("="): k for k, v in _IDX_TYPES.items()}
    key = arr.dtype.newbyteorder("=")
    if key not in codes:
        raise ValueError(f"dtype {arr.dtype} has no IDX code")
    code = codes[key]
    header = bytes([0, 0, code, arr.ndim]) + struct.pack(f">{arr.ndim}I", *arr.shape)
    body = arr.astype(_IDX_TYPES[code]).tobytes()
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as fh:
        fh.write(header + body)


def load_idx_dataset(images_path, labels_path, n_classes: int = 10) -> Dataset:
    """Images flattened and scaled to [0, 1], with their labels."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(x, labels.astype(np.int64), n_classes)


def partition_iid(data: Dataset, num_eds: int, per_class_count: int, rng: np.random.Generator) -> list[Dataset]:
    """Give every device ``per_class_count`` distinct samples of every class."""
    counts = data.class_counts()
    need = num_eds * per_class_count
    if np.any(counts < need):
        raise ValueError(f"need {need} samples per class, smallest class has {counts.min()}")
    per_ed = [[] for _ in range(num_eds)]
    for c in range(data.n_classes):
        idx = rng.permutation(np.flatnonzero(data.y == c))[:need]
        for k, chunk in enumerate(np.split(idx, num_eds)):
            per_ed[k].append(chunk)
    return [data.subset(np.concatenate(parts)) for parts in per_ed]


def ring_labels(ring: int, n_classes: int = 10, n_rings: int = 5) -> np.ndarray:
    """Labels held in 0-based ring ``ring``: ``ring .. ring + n_classes/2``, clipped."""
    hi = min(ring + n_classes // 2, n_classes - 1)
    return np.arange(ring, hi + 1)


def partition_location(
    data: Dataset,
    distances,
    cfg: CellConfig,
    rng: np.random.Generator,
    n_rings: int = 5,
) -> list[Dataset]:
    """Location-dependent labels over equal-area rings.

    A device in ring ``u`` (counting from 1 at the center) only holds labels
    ``u-1 .. u+4`` for 10 classes. The samples of each class are split evenly
    and disjointly among all devices that hold the class.
    """
    distances = np.asarray(distances, dtype=float)
    rings = ring_index(distances, cfg, n_rings)
    holders: dict[int, list[int]] = {c: [] for c in range(data.n_classes)}
    for k, r in enumerate(rings):
        for c in ring_labels(int(r), data.n_classes, n_rings):
            holders[int(c)].append(k)
    per_ed = [[] for _ in distances]
    for c, eds in holders.items():
        if not eds:
            continue
        idx = rng.permutation(np.flatnonzero(data.y == c))
        for k, chunk in zip(eds, np.array_split(idx, len(eds))):
            per_ed[k].append(chunk)
    return [data.subset(np.concatenate(parts) if parts else np.array([], dtype=int)) for parts in per_ed]
