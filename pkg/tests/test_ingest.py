import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propfuse import ingest
from propfuse.errors import (
    BadMagicError,
    EmptyDatasetError,
    LabelOutOfRangeError,
    ShapeMismatchError,
    TruncatedError,
)


def image_file(count, payload=b""):
    return struct.pack(">IIII", ingest.IMAGE_MAGIC, count, 28, 28) + payload


def label_file(count, payload=b""):
    return struct.pack(">II", ingest.LABEL_MAGIC, count) + payload


class TestParseImages:
    def test_zero_count_file(self):
        assert len(ingest.parse_idx_images(image_file(0))) == 0

    def test_single_zero_image(self):
        images = ingest.parse_idx_images(image_file(1, bytes(784)))
        assert images.shape == (1, 28, 28)
        assert not images.any()

    def test_payload_round_trips_byte_exact(self):
        rng = np.random.default_rng(0)
        original = image_file(3, rng.integers(0, 256, size=3 * 784, dtype=np.uint8).tobytes())
        assert ingest.write_idx_images(ingest.parse_idx_images(original)) == original

    def test_bad_magic(self):
        with pytest.raises(BadMagicError):
            ingest.parse_idx_images(struct.pack(">IIII", 0x00000801, 0, 28, 28))

    def test_truncated_payload(self):
        with pytest.raises(TruncatedError):
            ingest.parse_idx_images(image_file(2, bytes(784)))

    def test_trailing_garbage_rejected(self):
        with pytest.raises(TruncatedError):
            ingest.parse_idx_images(image_file(1, bytes(785)))

    def test_non_28x28_rejected(self):
        data = struct.pack(">IIII", ingest.IMAGE_MAGIC, 1, 14, 14) + bytes(196)
        with pytest.raises(ShapeMismatchError):
            ingest.parse_idx_images(data)


class TestParseLabels:
    def test_direct_read(self):
        labels = ingest.parse_idx_labels(label_file(3, bytes([0, 5, 9])))
        assert labels.tolist() == [0, 5, 9]

    def test_truncated(self):
        with pytest.raises(TruncatedError):
            ingest.parse_idx_labels(label_file(1))

    def test_bad_magic(self):
        with pytest.raises(BadMagicError):
            ingest.parse_idx_labels(struct.pack(">II", ingest.IMAGE_MAGIC, 0))

    def test_label_out_of_range_on_binding(self):
        images = np.zeros((1, 28, 28), dtype=np.uint8)
        with pytest.raises(LabelOutOfRangeError):
            ingest.make_dataset(images, np.array([10]), "mnist")


@given(st.binary(min_size=0, max_size=3 * 784))
@settings(max_examples=100)
def test_image_round_trip_property(payload):
    # Pad to a whole number of images.
    count = len(payload) // 784
    payload = payload[: count * 784]
    data = image_file(count, payload)
    assert ingest.write_idx_images(ingest.parse_idx_images(data)) == data


@given(st.lists(st.integers(0, 255), max_size=64))
def test_label_round_trip_property(values):
    data = label_file(len(values), bytes(values))
    assert ingest.write_idx_labels(ingest.parse_idx_labels(data)) == data


class TestOrientation:
    def test_all_zero_fixed_point(self):
        img = np.zeros((28, 28), dtype=np.uint8)
        assert not ingest.orient_emnist(img).any()

    def test_single_pixel_permutation(self):
        img = np.zeros((28, 28), dtype=np.uint8)
        img[3, 10] = 200
        out = ingest.orient_emnist(img)
        assert out.sum() == 200
        # Transpose moves (r, c) to (c, r); the horizontal flip then
        # mirrors the column.
        assert out[10, 27 - 3] == 200

    def test_inverse_restores_raw_bit_exact(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(28, 28), dtype=np.uint8)
        oriented = ingest.orient_emnist(img)
        assert np.array_equal(ingest.orient_emnist_inverse(oriented), img)
        assert np.array_equal(ingest.orient_emnist(ingest.orient_emnist_inverse(img)), img)


def toy_dataset(labels, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(len(labels), 28, 28), dtype=np.uint8)
    class_count = int(max(labels)) + 1
    return ingest.Dataset(
        images=images,
        labels=np.array(labels, dtype=np.int64),
        class_names=tuple(str(i) for i in range(class_count)),
    )


class TestSplit:
    def test_cardinality(self):
        dataset = toy_dataset([0, 0, 0, 0, 0, 1, 1, 1, 1, 1])
        train, holdout = ingest.split(dataset, 0.8, seed=7)
        assert len(train) == 8 and len(holdout) == 2

    def test_determinism(self):
        dataset = toy_dataset([0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2])
        a = ingest.split(dataset, 0.5, seed=3)
        b = ingest.split(dataset, 0.5, seed=3)
        assert np.array_equal(a[0].images, b[0].images)
        assert np.array_equal(a[1].labels, b[1].labels)

    def test_exact_halves_at_scale(self):
        labels = np.repeat(np.arange(10), 600)  # 6000 samples
        dataset = toy_dataset(labels.tolist())
        train, holdout = ingest.split(dataset, 0.5, seed=0)
        assert len(train) == 3000 and len(holdout) == 3000

    def test_partition_preserves_multiset(self):
        dataset = toy_dataset([0, 1, 0, 1, 2, 2, 0, 1, 2, 0])
        train, holdout = ingest.split(dataset, 0.7, seed=11)

        def keyset(ds):
            return sorted(
                (ds.images[i].tobytes(), int(ds.labels[i])) for i in range(len(ds))
            )

        merged = sorted(keyset(train) + keyset(holdout))
        assert merged == keyset(dataset)

    def test_stratification(self):
        labels = [0] * 50 + [1] * 50
        train, _ = ingest.split(toy_dataset(labels), 0.8, seed=5)
        assert int(np.sum(train.labels == 0)) == 40
        assert int(np.sum(train.labels == 1)) == 40

    def test_empty_dataset_rejected(self):
        empty = ingest.Dataset(
            images=np.zeros((0, 28, 28), dtype=np.uint8),
            labels=np.zeros(0, dtype=np.int64),
            class_names=("0",),
        )
        with pytest.raises(EmptyDatasetError):
            ingest.split(empty, 0.5, seed=0)


class TestSubset:
    def test_exact_size_and_stratification(self):
        labels = np.repeat(np.arange(5), 100).tolist()
        subset = ingest.stratified_subset(toy_dataset(labels), 50, seed=2)
        assert len(subset) == 50
        counts = np.bincount(subset.labels, minlength=5)
        assert counts.tolist() == [10] * 5

    def test_zero_rejected(self):
        with pytest.raises(EmptyDatasetError):
            ingest.stratified_subset(toy_dataset([0, 1]), 0, seed=0)


class TestDatasetTypes:
    def test_sample_views(self):
        dataset = toy_dataset([1, 0])
        sample = dataset[0]
        assert sample.label == 1
        assert sample.pixels.shape == (28, 28)
        assert len(list(dataset)) == 2

    def test_emnist_class_alphabet(self):
        assert len(ingest.EMNIST_BALANCED_CLASS_NAMES) == 47
        assert ingest.EMNIST_BALANCED_CLASS_NAMES[18] == "I"
        assert ingest.EMNIST_BALANCED_CLASS_NAMES[28] == "S"
        assert ingest.EMNIST_BALANCED_CLASS_NAMES[43] == "n"
