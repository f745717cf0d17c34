"""Datasets: seeded Gaussian blobs and the IDX (MNIST) container."""

import struct
from dataclasses import dataclass

import numpy as np

from fixhead import projection
from fixhead.numerics import Rng, derive_seed

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

_BLOB_MEANS_TAG = 0xB10B
_BLOB_NOISE_TAG = 0x0A15E
_BLOB_SPLIT_TAG = 0x5B117


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (num_samples, dim)
    labels: np.ndarray  # (num_samples,) int64
    n_classes: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels outside [0, {self.n_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx], self.n_classes)


def make_blobs(n_classes, dim, per_class, noise_sigma, seed, val_fraction=0.2):
    """Gaussian blobs around unit-norm class means; deterministic 80/20 split.

    ``noise_sigma == 0`` is allowed and places every sample on its class mean.
    """
    if dim < 2 or n_classes < 2:
        raise ValueError(f"need dim >= 2 and n_classes >= 2, got dim={dim}, C={n_classes}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    means = projection._unit_rows(dim, n_classes, derive_seed(seed, _BLOB_MEANS_TAG)).q.T
    labels = np.repeat(np.arange(n_classes), per_class)
    noise = Rng(derive_seed(seed, _BLOB_NOISE_TAG)).normal(labels.size * dim)
    features = means[labels] + noise_sigma * noise.reshape(labels.size, dim)
    perm = Rng(derive_seed(seed, _BLOB_SPLIT_TAG)).permutation(labels.size)
    n_val = int(round(val_fraction * labels.size))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    full = Dataset(features, labels, n_classes)
    return full.subset(np.sort(train_idx)), full.subset(np.sort(val_idx))


def nearest_mean_error(train, val):
    """Validation error of the nearest-class-mean classifier fit on ``train``."""
    means = np.stack([train.features[train.labels == c].mean(axis=0)
                      for c in range(train.n_classes)])
    d = ((val.features[:, None, :] - means[None, :, :]) ** 2).sum(axis=-1)
    return float(np.mean(np.argmin(d, axis=1) != val.labels))


class IdxError(ValueError):
    """Base class for IDX parse failures; messages name the file and byte offset."""


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxLengthMismatchError(IdxError):
    pass


def _read_idx(path, expected_magic):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: truncated at byte offset {len(raw)} (magic needs 4 bytes)")
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic != expected_magic:
        raise IdxMagicError(
            f"{path}: bad magic 0x{magic:08x} at byte offset 0, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxTruncatedError(f"{path}: truncated at byte offset {len(raw)} in dimension header")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise IdxTruncatedError(
            f"{path}: truncated at byte offset {len(raw)}, data needs {header + size} bytes"
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header)
    return dims, data


def load_idx(images_path, labels_path, limit=None):
    """Load an IDX image/label pair; pixels scaled to [0, 1], images flattened."""
    dims, pixels = _read_idx(images_path, IMAGES_MAGIC)
    (n_labels,), labels = _read_idx(labels_path, LABELS_MAGIC)
    n_images = dims[0]
    if n_images != n_labels:
        raise IdxLengthMismatchError(
            f"{images_path} has {n_images} images but {labels_path} has {n_labels} labels "
            "(count field at byte offset 4)"
        )
    width = int(np.prod(dims[1:]))
    count = n_images if limit is None else min(int(limit), n_images)
    features = pixels[: count * width].reshape(count, width).astype(np.float64) / 255.0
    labels = labels[:count].astype(np.int64)
    n_classes = int(labels.max()) + 1 if count else 0
    return Dataset(features, labels, n_classes)


def quantize(features):
    """Map [0, 1] features to bytes, clipping out-of-range values."""
    return np.clip(np.rint(np.asarray(features) * 255.0), 0, 255).astype(np.uint8)


def write_idx(dataset, images_path, labels_path, image_shape=None):
    """Write ``dataset`` as IDX files; features are quantized to u8 first.

    ``image_shape`` defaults to ``(1, dim)``; images are always stored 3-D.
    """
    n = len(dataset)
    shape = tuple(image_shape) if image_shape is not None else (1, dataset.dim)
    if len(shape) != 2:
        raise ValueError(f"image_shape must be (rows, cols), got {shape}")
    if int(np.prod(shape)) != dataset.dim:
        raise ValueError(f"image_shape {shape} does not hold {dataset.dim} features")
    if dataset.n_classes > 256:
        raise ValueError("IDX labels are single bytes; at most 256 classes")
    dims = (n,) + shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IMAGES_MAGIC, *dims))
        f.write(quantize(dataset.features).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, n))
        f.write(dataset.labels.astype(np.uint8).tobytes())
