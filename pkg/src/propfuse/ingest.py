"""IDX file ingestion and dataset handling.

IDX is the distribution format of the supported handwritten character
sets. Layout, all integers big-endian:

    images:  u32 magic 0x00000803 | u32 count | u32 rows | u32 cols
             followed by count*rows*cols unsigned bytes, row-major
    labels:  u32 magic 0x00000801 | u32 count
             followed by count unsigned bytes

Only 28x28 images are supported. Parsing is strict: the byte length must
equal exactly what the header promises, so a parse/serialize round trip
is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from .errors import (
    BadMagicError,
    EmptyDatasetError,
    LabelOutOfRangeError,
    ShapeMismatchError,
    TruncatedError,
)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SIDE = 28

MNIST_CLASS_NAMES = tuple(str(d) for d in range(10))

# 47-class balanced alphabet: digits, uppercase, and the lowercase letters
# that survive the case merge.
EMNIST_BALANCED_CLASS_NAMES = tuple(
    [str(d) for d in range(10)]
    + [chr(ord("A") + i) for i in range(26)]
    + list("abdefghnqrt")
)

DATASET_CLASS_NAMES = {
    "mnist": MNIST_CLASS_NAMES,
    "emnist-balanced": EMNIST_BALANCED_CLASS_NAMES,
}


@dataclass(frozen=True)
class ImageSample:
    """One 28x28 grayscale image with its class label."""

    pixels: np.ndarray
    label: int

    def __post_init__(self):
        if self.pixels.shape != (SIDE, SIDE):
            raise ShapeMismatchError(
                f"expected {SIDE}x{SIDE} pixels, got {self.pixels.shape}"
            )


@dataclass(frozen=True)
class Dataset:
    """Ordered image collection bound to a class alphabet.

    Backed by contiguous arrays (images uint8 (N,28,28), labels int64 (N,))
    for speed; index access returns :class:`ImageSample` views. Immutable
    after construction and safe to share across threads.
    """

    images: np.ndarray
    labels: np.ndarray
    class_names: Tuple[str, ...]

    def __post_init__(self):
        if self.images.ndim != 3 or self.images.shape[1:] != (SIDE, SIDE):
            raise ShapeMismatchError(
                f"expected images of shape (n, {SIDE}, {SIDE}), got {self.images.shape}"
            )
        if len(self.images) != len(self.labels):
            raise ShapeMismatchError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if len(self.class_names) == 0:
            raise ValueError("class_names must be non-empty")
        if len(self.labels) and self.labels.max() >= len(self.class_names):
            bad = int(self.labels.max())
            raise LabelOutOfRangeError(
                f"label {bad} >= class count {len(self.class_names)}"
            )
        if len(self.labels) and self.labels.min() < 0:
            raise LabelOutOfRangeError("negative label")

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.images)

    def __getitem__(self, index: int) -> ImageSample:
        return ImageSample(self.images[index], int(self.labels[index]))

    def __iter__(self) -> Iterator[ImageSample]:
        for i in range(len(self)):
            yield self[i]


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image file into a (count, 28, 28) uint8 array."""
    if len(data) < 4:
        raise TruncatedError(f"file of {len(data)} bytes has no room for magic")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != IMAGE_MAGIC:
        raise BadMagicError(f"expected 0x{IMAGE_MAGIC:08x}, got 0x{magic:08x}")
    if len(data) < 16:
        raise TruncatedError(f"header needs 16 bytes, file has {len(data)}")
    count, rows, cols = struct.unpack(">III", data[4:16])
    if rows != SIDE or cols != SIDE:
        raise ShapeMismatchError(f"expected {SIDE}x{SIDE} images, got {rows}x{cols}")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise TruncatedError(
            f"header promises {expected} bytes, file has {len(data)}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows, cols).copy()


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX label file into a (count,) uint8 array."""
    if len(data) < 4:
        raise TruncatedError(f"file of {len(data)} bytes has no room for magic")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != LABEL_MAGIC:
        raise BadMagicError(f"expected 0x{LABEL_MAGIC:08x}, got 0x{magic:08x}")
    if len(data) < 8:
        raise TruncatedError(f"header needs 8 bytes, file has {len(data)}")
    (count,) = struct.unpack(">I", data[4:8])
    expected = 8 + count
    if len(data) != expected:
        raise TruncatedError(
            f"header promises {expected} bytes, file has {len(data)}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=8).copy()


def write_idx_images(images: np.ndarray) -> bytes:
    """Serialize a (count, 28, 28) array back to IDX bytes."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3 or images.shape[1:] != (SIDE, SIDE):
        raise ShapeMismatchError(f"expected (n, {SIDE}, {SIDE}), got {images.shape}")
    header = struct.pack(">IIII", IMAGE_MAGIC, len(images), SIDE, SIDE)
    return header + images.tobytes()


def write_idx_labels(labels: np.ndarray) -> bytes:
    """Serialize a (count,) label array back to IDX bytes."""
    labels = np.asarray(labels, dtype=np.uint8)
    header = struct.pack(">II", LABEL_MAGIC, len(labels))
    return header + labels.tobytes()


def orient_emnist(image: np.ndarray) -> np.ndarray:
    """Reorient a raw stored image to render upright.

    The stored layout needs a transpose followed by a horizontal flip;
    :func:`orient_emnist_inverse` restores the raw layout bit-exactly.
    """
    return np.ascontiguousarray(image.T[:, ::-1])


def orient_emnist_inverse(image: np.ndarray) -> np.ndarray:
    """Undo :func:`orient_emnist`."""
    return np.ascontiguousarray(image[:, ::-1].T)


def make_dataset(images: np.ndarray, labels: np.ndarray, kind: str) -> Dataset:
    """Bind parsed images and labels into a dataset of the given kind."""
    if kind not in DATASET_CLASS_NAMES:
        raise ValueError(
            f"unknown dataset kind {kind!r}; expected one of {sorted(DATASET_CLASS_NAMES)}"
        )
    if len(images) != len(labels):
        raise ShapeMismatchError(f"{len(images)} images but {len(labels)} labels")
    if kind == "emnist-balanced":
        images = np.stack([orient_emnist(img) for img in images]) if len(images) else images
    return Dataset(
        images=images,
        labels=labels.astype(np.int64),
        class_names=DATASET_CLASS_NAMES[kind],
    )


def load_dataset(images_path, labels_path, kind: str) -> Dataset:
    """Read an IDX image/label file pair from disk into a dataset."""
    with open(images_path, "rb") as f:
        images = parse_idx_images(f.read())
    with open(labels_path, "rb") as f:
        labels = parse_idx_labels(f.read())
    return make_dataset(images, labels, kind)


def split(dataset: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Deterministic stratified partition into (train, holdout).

    The train side gets round(fraction * n) samples overall, apportioned
    per class by largest fractional remainder so the one-vs-rest balance
    of the input is preserved. Both sides keep the original sample order.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")

    rng = np.random.default_rng(seed)
    target = round(fraction * len(dataset))

    per_class = []  # (class id, shuffled indices, floor quota, remainder)
    for d in range(dataset.class_count):
        idx = np.flatnonzero(dataset.labels == d)
        if len(idx) == 0:
            continue
        idx = idx[rng.permutation(len(idx))]
        quota = fraction * len(idx)
        per_class.append([d, idx, int(quota), quota - int(quota)])

    spare = target - sum(entry[2] for entry in per_class)
    # Hand out the leftover slots by largest remainder, class id breaking ties.
    for entry in sorted(per_class, key=lambda e: (-e[3], e[0])):
        if spare <= 0:
            break
        if entry[2] < len(entry[1]):
            entry[2] += 1
            spare -= 1

    train_idx = np.concatenate(
        [entry[1][: entry[2]] for entry in per_class]
        or [np.empty(0, dtype=np.int64)]
    )
    train_mask = np.zeros(len(dataset), dtype=bool)
    train_mask[train_idx] = True

    def take(mask):
        return Dataset(
            images=dataset.images[mask],
            labels=dataset.labels[mask],
            class_names=dataset.class_names,
        )

    return take(train_mask), take(~train_mask)


def stratified_subset(dataset: Dataset, n: int, seed: int) -> Dataset:
    """Deterministic stratified sample of exactly n items."""
    if n <= 0:
        raise EmptyDatasetError(f"subset size must be positive, got {n}")
    if n > len(dataset):
        raise ValueError(f"requested {n} samples from a dataset of {len(dataset)}")
    if n == len(dataset):
        return dataset
    subset, _ = split(dataset, n / len(dataset), seed)
    return subset


def fingerprint(dataset: Dataset) -> str:
    """Content hash of the samples, for provenance tracking."""
    import hashlib

    h = hashlib.sha256()
    h.update(dataset.images.tobytes())
    h.update(dataset.labels.tobytes())
    h.update("|".join(dataset.class_names).encode())
    return h.hexdigest()
