"""
Datasets: MNIST IDX files, synthetic Double-MNIST, Gaussian blobs, and
mini-batch iteration.
"""

from dataclasses import dataclass
import gzip
import itertools
import logging
from pathlib import Path
import struct

import numpy as np

from .exceptions import ConsistencyError, DataFormatError, DataLengthError, InputError

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049

MNIST_FILES = {
    'train': ('train-images-idx3-ubyte', 'train-labels-idx1-ubyte'),
    'test': ('t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte'),
}

DOUBLE_MNIST_CANVAS = 64
DIGIT_SIZE = 28
MAX_BOX_OVERLAP = 0.5


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str

    def __post_init__(self):
        if self.images.ndim != 4:
            raise InputError(f"{self.name}: images must be count x channels x height x width")
        if len(self.images) != len(self.labels):
            raise ConsistencyError(
                f"{self.name}: {len(self.images)} images but {len(self.labels)} labels"
            )
        if self.num_classes < 1:
            raise InputError(f"{self.name}: num_classes must be positive")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise InputError(f"{self.name}: labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(self.images)) or (
            self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0)
        ):
            raise InputError(f"{self.name}: pixel values must be finite and within [0, 1]")

    def __len__(self):
        return len(self.labels)

    @property
    def example_shape(self):
        return self.images.shape[1:]

    def take(self, indices, name=None):
        indices = np.asarray(indices)
        return Dataset(self.images[indices], self.labels[indices], self.num_classes, name or self.name)


# ==================== IDX FILES ====================

def _open(path):
    path = Path(path)
    if path.suffix == '.gz':
        return gzip.open(path, 'rb')
    return open(path, 'rb')


def _read_idx(path, expected_magic):
    """Header dims and unsigned-byte payload of an IDX file."""
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataLengthError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack('>i', raw[:4])
    if magic != expected_magic:
        raise DataFormatError(f"{path}: magic number {magic}, expected {expected_magic}")
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise DataLengthError(f"{path}: header promises {ndim} dimensions but the file ends early")
    dims = struct.unpack(f'>{ndim}i', raw[4:header_end])
    expected = int(np.prod(dims))
    payload = np.frombuffer(raw, dtype=np.uint8, offset=header_end)
    if payload.size < expected:
        raise DataLengthError(f"{path}: payload holds {payload.size} bytes, header promises {expected}")
    return dims, payload[:expected]


def load_mnist_idx(images_path, labels_path, name='mnist'):
    image_dims, pixels = _read_idx(images_path, IDX_IMAGES_MAGIC)
    label_dims, labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    count, rows, cols = image_dims
    if label_dims[0] != count:
        raise ConsistencyError(f"{images_path} holds {count} images but {labels_path} holds {label_dims[0]} labels")
    images = pixels.reshape(count, 1, rows, cols).astype(np.float64) / 255.0
    logger.info("loaded %d images of %dx%d from %s", count, rows, cols, images_path)
    return Dataset(images, labels.astype(np.int64), num_classes=10, name=name)


def write_idx_images(path, images):
    """Write count x 1 x rows x cols images in [0, 1] as IDX bytes."""
    pixels = np.rint(np.asarray(images)[:, 0] * 255.0).astype(np.uint8)
    count, rows, cols = pixels.shape
    with open(path, 'wb') as fh:
        fh.write(struct.pack('>4i', IDX_IMAGES_MAGIC, count, rows, cols))
        fh.write(pixels.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels).astype(np.uint8)
    with open(path, 'wb') as fh:
        fh.write(struct.pack('>2i', IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.tobytes())


def _find_file(data_dir, stem):
    for candidate in (stem, f"{stem}.gz"):
        path = Path(data_dir) / candidate
        if path.exists():
            return path
    raise FileNotFoundError(f"{stem} not found under {data_dir}")


def load_mnist_split(data_dir, split):
    images, labels = MNIST_FILES[split]
    return load_mnist_idx(_find_file(data_dir, images), _find_file(data_dir, labels), name=f"mnist-{split}")


def mnist_available(data_dir):
    try:
        for split in MNIST_FILES:
            for stem in MNIST_FILES[split]:
                _find_file(data_dir, stem)
    except FileNotFoundError:
        return False
    return True


# ==================== DOUBLE MNIST ====================

class PairLabelMap:
    """
    Unordered digit pairs onto 55 classes: {a, a} -> a, then the distinct
    pairs a < b in lexicographic order from 10.
    """
    num_classes = 55

    def __init__(self):
        distinct = itertools.combinations(range(10), 2)
        self._to_class = {(a, a): a for a in range(10)}
        self._to_class.update({pair: 10 + rank for rank, pair in enumerate(distinct)})
        self._to_pair = {index: pair for pair, index in self._to_class.items()}

    def class_of(self, a, b):
        a, b = sorted((int(a), int(b)))
        if not 0 <= a <= b <= 9:
            raise InputError(f"digits must lie in [0, 9], got {a} and {b}")
        return self._to_class[(a, b)]

    def pair_of(self, index):
        return self._to_pair[index]

    def __len__(self):
        return len(self._to_class)


def _box_overlap(first, second):
    dy = max(0, DIGIT_SIZE - abs(first[0] - second[0]))
    dx = max(0, DIGIT_SIZE - abs(first[1] - second[1]))
    return dy * dx / (DIGIT_SIZE * DIGIT_SIZE)


def _place_offsets(rng):
    """Two top-left offsets whose 28x28 boxes overlap by at most half."""
    limit = DOUBLE_MNIST_CANVAS - DIGIT_SIZE
    while True:
        offsets = rng.integers(0, limit + 1, size=(2, 2))
        if _box_overlap(offsets[0], offsets[1]) <= MAX_BOX_OVERLAP:
            return offsets


def synth_double_mnist(source, count, rng, name='double-mnist'):
    """
    Superimpose two random source digits on a 64x64 canvas (pixelwise max).
    """
    if count <= 0:
        raise InputError(f"count must be positive, got {count}")
    if source.example_shape != (1, DIGIT_SIZE, DIGIT_SIZE):
        raise InputError(f"source must hold 1x28x28 digits, got {source.example_shape}")
    pairs = PairLabelMap()
    images = np.zeros((count, 1, DOUBLE_MNIST_CANVAS, DOUBLE_MNIST_CANVAS), dtype=np.float64)
    labels = np.empty(count, dtype=np.int64)
    for n in range(count):
        first, second = rng.integers(0, len(source), size=2)
        for index, (top, left) in zip((first, second), _place_offsets(rng)):
            window = images[n, 0, top:top + DIGIT_SIZE, left:left + DIGIT_SIZE]
            np.maximum(window, source.images[index, 0], out=window)
        labels[n] = pairs.class_of(source.labels[first], source.labels[second])
    return Dataset(images, labels, num_classes=pairs.num_classes, name=name)


# ==================== GAUSSIAN BLOBS ====================

BLOB_CENTER_SPREAD = 0.35
BLIND_NOISE = 0.1
MAX_NOISE = 0.25


def synth_gaussian_blobs(num_classes, per_class, dim, separation, rng, name='blobs'):
    """
    Isotropic Gaussian clouds in [0, 1]^dim shaped 1 x 1 x dim.

    The ratio of the smallest centre distance to the noise deviation equals
    ``separation``; at separation 0 all classes share one cloud.
    """
    if separation < 0:
        raise InputError(f"separation must be non-negative, got {separation}")
    if num_classes < 1 or per_class < 1 or dim < 1:
        raise InputError("num_classes, per_class and dim must be positive")

    directions = rng.normal(size=(num_classes, dim))
    directions /= np.max(np.abs(directions))
    centers = 0.5 + BLOB_CENTER_SPREAD * (separation / (separation + 1.0)) * directions

    if separation > 0 and num_classes > 1:
        gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
        nearest = gaps[~np.eye(num_classes, dtype=bool)].min()
        noise = min(nearest / separation, MAX_NOISE)
    else:
        noise = BLIND_NOISE

    labels = np.repeat(np.arange(num_classes), per_class)
    points = centers[labels] + noise * rng.normal(size=(len(labels), dim))
    images = np.clip(points, 0.0, 1.0).reshape(len(labels), 1, 1, dim)
    return Dataset(images, labels, num_classes=num_classes, name=name)


# ==================== ITERATION ====================

@dataclass(frozen=True)
class Batch:
    images: np.ndarray
    labels: np.ndarray
    indices: np.ndarray


def minibatches(ds, batch_size, rng):
    """One epoch: a fresh shuffle cut into contiguous batches; the last may be short."""
    if batch_size < 1:
        raise InputError(f"batch_size must be at least 1, got {batch_size}")
    order = rng.permutation(len(ds))
    return [
        Batch(ds.images[chunk], ds.labels[chunk], chunk)
        for chunk in (order[start:start + batch_size] for start in range(0, len(order), batch_size))
    ]


def batch_stream(ds, batch_size, rng):
    """Endless batches, epoch after epoch."""
    while True:
        yield from minibatches(ds, batch_size, rng)


def subset(ds, count, rng, name=None):
    """A uniformly drawn subset of ``count`` examples (the whole set if count is None)."""
    if count is None or count >= len(ds):
        return ds
    if count < 1:
        raise InputError(f"subset size must be positive, got {count}")
    return ds.take(np.sort(rng.choice(len(ds), size=count, replace=False)), name)
