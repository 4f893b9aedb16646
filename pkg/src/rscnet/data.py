"""Dataset loading (IDX, CIFAR-10 binary), synthetic data, subsampling and a CSV cache.

Every row is rescaled to squared norm d; class labels map to y = class / 4.5 - 1.
"""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049
CIFAR_RECORD = 3073
CIFAR_RECORDS = 10000


class DataFormatError(ValueError):
    pass


def default_label_map(classes: np.ndarray) -> np.ndarray:
    return classes.astype(np.float64) / 4.5 - 1.0


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    source: str

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def normalize_rows(X: np.ndarray) -> np.ndarray:
    """Rescale each row to squared norm d; zero rows are rejected."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise DataFormatError(f"row {bad} is all zeros and cannot be normalized")
    return X * (np.sqrt(X.shape[1]) / norms)[:, None]


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _check_magic(raw: bytes, expected: int, what: str) -> None:
    if len(raw) < 4:
        raise DataFormatError(f"truncated IDX {what} header")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic != expected:
        raise DataFormatError(f"bad {what} magic {magic}, expected {expected}")


def parse_idx_images(raw: bytes) -> np.ndarray:
    _check_magic(raw, IMAGES_MAGIC, "image")
    if len(raw) < 16:
        raise DataFormatError("truncated IDX image header")
    _, count, rows, cols = struct.unpack(">iiii", raw[:16])
    size = count * rows * cols
    if len(raw) - 16 < size:
        raise DataFormatError(f"truncated image data: need {size} bytes, have {len(raw) - 16}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=16).reshape(count, rows * cols)


def parse_idx_labels(raw: bytes) -> np.ndarray:
    _check_magic(raw, LABELS_MAGIC, "label")
    if len(raw) < 8:
        raise DataFormatError("truncated IDX label header")
    _, count = struct.unpack(">ii", raw[:8])
    if len(raw) - 8 < count:
        raise DataFormatError(f"truncated label data: need {count} bytes, have {len(raw) - 8}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).copy()


def load_idx(images_path: str | Path, labels_path: str | Path,
             label_map: Callable[[np.ndarray], np.ndarray] = default_label_map) -> Dataset:
    images = parse_idx_images(_read_bytes(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = normalize_rows(images.astype(np.float64) / 255.0)
    return Dataset(X, label_map(labels), f"idx:{Path(images_path).name}")


def write_idx_images(path: str | Path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(path).write_bytes(struct.pack(">iiii", IMAGES_MAGIC, count, rows, cols) + images.tobytes())


def write_idx_labels(path: str | Path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">ii", LABELS_MAGIC, labels.size) + labels.tobytes())


def load_cifar10(batch_path: str | Path, records: int = CIFAR_RECORDS,
                 label_map: Callable[[np.ndarray], np.ndarray] = default_label_map) -> Dataset:
    raw = Path(batch_path).read_bytes()
    if len(raw) != records * CIFAR_RECORD:
        raise DataFormatError(f"CIFAR-10 batch must be {records * CIFAR_RECORD} bytes, got {len(raw)}")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(records, CIFAR_RECORD)
    X = normalize_rows(arr[:, 1:].astype(np.float64) / 255.0)
    return Dataset(X, label_map(arr[:, 0]), f"cifar10:{Path(batch_path).name}")


def subsample(ds: Dataset, n: int, seed: int = 0) -> Dataset:
    if n > ds.n:
        raise ValueError(f"requested {n} rows but only {ds.n} available")
    idx = np.random.default_rng(seed).choice(ds.n, size=n, replace=False)
    return Dataset(ds.X[idx], ds.y[idx], f"{ds.source}|subsample(n={n},seed={seed})")


def synthetic(n: int, d: int, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    X = normalize_rows(rng.standard_normal((n, d)))
    y = rng.uniform(-1.0, 1.0, size=n)
    return Dataset(X, y, f"synthetic(n={n},d={d},seed={seed})")


def save_csv(ds: Dataset, path: str | Path) -> None:
    """Write the cache format ``idx,label,pixels...`` with round-trip exact floats."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["idx", "label"] + [f"p{j}" for j in range(ds.d)])
        for i in range(ds.n):
            w.writerow([i, repr(float(ds.y[i]))] + [repr(float(v)) for v in ds.X[i]])


def load_csv(path: str | Path, source: str | None = None) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["idx", "label"]:
        raise DataFormatError("missing idx,label header")
    body = rows[1:]
    y = np.array([float(r[1]) for r in body])
    X = np.array([[float(v) for v in r[2:]] for r in body])
    return Dataset(X, y, source or f"csv:{Path(path).name}")


def find_idx_pair(directory: str | Path, prefix: str = "train") -> tuple[Path, Path]:
    """Locate ``{prefix}-images-idx3-ubyte[.gz]`` and ``{prefix}-labels-idx1-ubyte[.gz]``."""
    directory = Path(directory)
    found = []
    for stem in (f"{prefix}-images-idx3-ubyte", f"{prefix}-labels-idx1-ubyte"):
        for cand in (directory / stem, directory / f"{stem}.gz", directory / stem.replace("-idx", ".idx")):
            if cand.exists():
                found.append(cand)
                break
        else:
            raise FileNotFoundError(f"{stem} not found in {directory}")
    return found[0], found[1]
