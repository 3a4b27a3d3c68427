"""Loss and gradient oracles over in-memory datasets, plus dataset creation and IDX ingestion.

Two objective kinds are provided.  MeanQuadratic is the analytic sanity
check: its minimizer is the dataset mean, so simulator output can be
compared against a closed form.  Logistic is multinomial softmax
regression with an optional L2 term, enough to train on image data or on
synthetic Gaussian blobs.
"""
from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rngs import DATA_STREAM, stream

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class ObjectiveError(ValueError):
    """Raised for shape mismatches and unsupported objective operations."""


class IdxError(ValueError):
    """Base class for IDX file problems."""


class BadMagicError(IdxError):
    pass


class TruncatedError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (m, dim) with optional integer labels of length m."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ObjectiveError(
                f"features must be a non-empty 2-D array, got shape {self.features.shape}"
            )
        if self.labels is not None:
            if self.labels.shape != (self.features.shape[0],):
                raise ObjectiveError(
                    f"labels shape {self.labels.shape} does not match m={self.features.shape[0]}"
                )
            if self.labels.min() < 0:
                raise ObjectiveError("labels must be non-negative integers")

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


class MeanQuadratic:
    """f(w; x) = 0.5*||w - x||^2, averaged over the dataset; minimized by the mean."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ObjectiveError(f"dim must be >= 1, got {dim}")
        self.dim = dim

    def grad(self, w: np.ndarray, ds: Dataset, idx: int) -> np.ndarray:
        self._check(w, ds, idx)
        return w - ds.features[idx]

    def loss(self, w: np.ndarray, ds: Dataset) -> float:
        self._check(w, ds, 0)
        diff = w[None, :] - ds.features
        return 0.5 * float(np.mean(np.sum(diff * diff, axis=1)))

    def accuracy(self, w: np.ndarray, ds: Dataset) -> float:
        raise ObjectiveError("accuracy is undefined for a quadratic target")

    def optimum(self, ds: Dataset) -> np.ndarray:
        return ds.features.mean(axis=0)

    def _check(self, w, ds, idx):
        if w.shape != (self.dim,):
            raise ObjectiveError(f"model shape {w.shape} != ({self.dim},)")
        if ds.dim != self.dim:
            raise ObjectiveError(f"dataset dim {ds.dim} != model dim {self.dim}")
        if not (0 <= idx < ds.m):
            raise ObjectiveError(f"sample index {idx} out of range for m={ds.m}")


class Logistic:
    """Multinomial softmax regression on a flat (classes * (features_dim + 1)) vector.

    The trailing column of the reshaped weight matrix is the bias.  The L2
    term, when nonzero, applies to the full parameter vector.  Predicted
    class is the argmax of the logits; ties resolve to the lowest class id.
    """

    def __init__(self, features_dim: int, classes: int, l2: float = 0.0):
        if features_dim < 1 or classes < 2:
            raise ObjectiveError("need features_dim >= 1 and classes >= 2")
        if l2 < 0:
            raise ObjectiveError(f"l2 must be >= 0, got {l2}")
        self.features_dim = features_dim
        self.classes = classes
        self.l2 = l2
        self.dim = classes * (features_dim + 1)

    def grad(self, w: np.ndarray, ds: Dataset, idx: int) -> np.ndarray:
        self._check(w, ds, idx)
        x = ds.features[idx]
        y = int(ds.labels[idx])
        if y >= self.classes:
            raise ObjectiveError(f"label {y} out of range for {self.classes} classes")
        W = w.reshape(self.classes, self.features_dim + 1)
        xt = np.append(x, 1.0)
        z = W @ xt
        z -= z.max()
        p = np.exp(z)
        p /= p.sum()
        p[y] -= 1.0
        g = np.outer(p, xt)
        if self.l2:
            g = g + self.l2 * W
        return g.ravel()

    def loss(self, w: np.ndarray, ds: Dataset) -> float:
        self._check(w, ds, 0)
        logits = self._logits(w, ds)
        rows = np.arange(ds.m)
        top = logits.argmax(axis=1)
        zmax = logits[rows, top]
        # log-sum-exp with the max term split out through log1p, and the
        # (zmax - picked) cancellation done before adding the small term, so
        # confidently-correct samples keep full relative precision
        rest = np.exp(logits - zmax[:, None])
        rest[rows, top] = 0.0
        picked = logits[rows, ds.labels]
        ce = float(np.mean((zmax - picked) + np.log1p(rest.sum(axis=1))))
        if self.l2:
            ce += 0.5 * self.l2 * float(w @ w)
        return ce

    def accuracy(self, w: np.ndarray, ds: Dataset) -> float:
        self._check(w, ds, 0)
        pred = np.argmax(self._logits(w, ds), axis=1)
        return float(np.mean(pred == ds.labels))

    def _logits(self, w: np.ndarray, ds: Dataset) -> np.ndarray:
        W = w.reshape(self.classes, self.features_dim + 1)
        return ds.features @ W[:, :-1].T + W[:, -1]

    def _check(self, w, ds, idx):
        if w.shape != (self.dim,):
            raise ObjectiveError(f"model shape {w.shape} != ({self.dim},)")
        if ds.dim != self.features_dim:
            raise ObjectiveError(f"dataset dim {ds.dim} != features_dim {self.features_dim}")
        if ds.labels is None:
            raise ObjectiveError("logistic objective needs a labeled dataset")
        if not (0 <= idx < ds.m):
            raise ObjectiveError(f"sample index {idx} out of range for m={ds.m}")


Objective = MeanQuadratic | Logistic


def synthetic_blobs(seed: int, m: int, dim: int, classes: int, separation: float) -> Dataset:
    """Unit-variance Gaussian clusters with centers on a circle of the given radius.

    Labels are drawn uniformly, so classes are balanced in expectation.
    separation=0 collapses every center to the origin (chance-level task).
    """
    if classes < 2:
        raise ObjectiveError(f"need classes >= 2, got {classes}")
    if m < classes:
        raise ObjectiveError(f"need m >= classes, got m={m}, classes={classes}")
    if dim < 1:
        raise ObjectiveError(f"need dim >= 1, got {dim}")
    rng = stream(seed, DATA_STREAM)
    centers = np.zeros((classes, dim))
    for k in range(classes):
        angle = 2.0 * math.pi * k / classes
        centers[k, 0] = separation * math.cos(angle)
        if dim > 1:
            centers[k, 1] = separation * math.sin(angle)
    labels = rng.integers(0, classes, size=m)
    features = centers[labels] + rng.standard_normal((m, dim))
    return Dataset(features, labels.astype(np.int64))


def gaussian_cloud(seed: int, m: int, dim: int, center, spread: float = 1.0) -> Dataset:
    """Single unlabeled Gaussian cluster, for quadratic targets."""
    if m < 1 or dim < 1:
        raise ObjectiveError(f"need m >= 1 and dim >= 1, got m={m}, dim={dim}")
    if spread < 0:
        raise ObjectiveError(f"spread must be >= 0, got {spread}")
    mu = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
    rng = stream(seed, DATA_STREAM)
    return Dataset(mu + spread * rng.standard_normal((m, dim)))


def iid_indices(n: int, m: int) -> list[np.ndarray]:
    """Every node samples from the whole dataset."""
    return [np.arange(m) for _ in range(n)]


def label_shards(seed: int, labels: np.ndarray, n: int) -> list[np.ndarray]:
    """Label-sorted contiguous shards, one per node: a deliberately skewed split."""
    order = np.argsort(labels, kind="stable")
    shards = np.array_split(order, n)
    rng = stream(seed, DATA_STREAM)
    rng.shuffle(shards)
    return [np.sort(s) for s in shards]


def _read_bytes(path: str | Path) -> bytes:
    p = Path(path)
    opener = gzip.open if p.suffix == ".gz" else open
    with opener(p, "rb") as fh:
        return fh.read()


def load_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Read an images/labels IDX pair into a Dataset with pixels scaled to [0, 1].

    Both files are big-endian: a 32-bit magic, 32-bit dimension sizes, then
    raw unsigned bytes.  Paths ending in .gz are decompressed transparently.
    """
    img = _read_bytes(images_path)
    if len(img) < 16:
        raise TruncatedError(f"{images_path}: header needs 16 bytes, file has {len(img)}")
    magic, count, rows, cols = struct.unpack(">IIII", img[:16])
    if magic != IMAGES_MAGIC:
        raise BadMagicError(f"{images_path}: magic {magic:#010x} != {IMAGES_MAGIC:#010x}")
    expected = count * rows * cols
    if len(img) - 16 != expected:
        raise TruncatedError(
            f"{images_path}: payload is {len(img) - 16} bytes, expected {expected}"
        )

    lbl = _read_bytes(labels_path)
    if len(lbl) < 8:
        raise TruncatedError(f"{labels_path}: header needs 8 bytes, file has {len(lbl)}")
    lmagic, lcount = struct.unpack(">II", lbl[:8])
    if lmagic != LABELS_MAGIC:
        raise BadMagicError(f"{labels_path}: magic {lmagic:#010x} != {LABELS_MAGIC:#010x}")
    if len(lbl) - 8 != lcount:
        raise TruncatedError(f"{labels_path}: payload is {len(lbl) - 8} bytes, expected {lcount}")
    if lcount != count:
        raise CountMismatchError(f"{count} images but {lcount} labels")

    features = np.frombuffer(img, dtype=np.uint8, offset=16).astype(np.float64) / 255.0
    labels = np.frombuffer(lbl, dtype=np.uint8, offset=8).astype(np.int64)
    return Dataset(features.reshape(count, rows * cols), labels)


def write_idx(images_path: str | Path, labels_path: str | Path, ds: Dataset) -> None:
    """Write a labeled dataset as an IDX pair, quantizing features to bytes.

    Features are min-max scaled to 0..255, so the round trip through
    load_idx is lossy for general floats but exact for byte-valued data.
    """
    if ds.labels is None:
        raise ObjectiveError("writing IDX needs a labeled dataset")
    lo = ds.features.min()
    hi = ds.features.max()
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pixels = np.floor((ds.features - lo) * scale + 0.5).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, ds.m, 1, ds.dim))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, ds.m))
        fh.write(ds.labels.astype(np.uint8).tobytes())


def read_idx_header(path: str | Path) -> dict:
    """Header summary for one IDX file: kind, count, and payload geometry."""
    data = _read_bytes(path)
    if len(data) < 8:
        raise TruncatedError(f"{path}: header needs at least 8 bytes, file has {len(data)}")
    magic = struct.unpack(">I", data[:4])[0]
    if magic == IMAGES_MAGIC:
        if len(data) < 16:
            raise TruncatedError(f"{path}: image header needs 16 bytes, file has {len(data)}")
        _, count, rows, cols = struct.unpack(">IIII", data[:16])
        return {
            "kind": "images",
            "magic": magic,
            "count": count,
            "rows": rows,
            "cols": cols,
            "payload_bytes": len(data) - 16,
        }
    if magic == LABELS_MAGIC:
        count = struct.unpack(">I", data[4:8])[0]
        return {"kind": "labels", "magic": magic, "count": count, "payload_bytes": len(data) - 8}
    raise BadMagicError(f"{path}: magic {magic:#010x} is neither images nor labels")
