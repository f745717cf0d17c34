import struct

import numpy as np
import pytest

from fixhead import data, projection
from fixhead.numerics import derive_seed


def write_raw(path, magic, dims, payload):
    path.write_bytes(struct.pack(f">I{len(dims)}I", magic, *dims) + bytes(payload))


def test_blobs_zero_noise_on_means():
    train, val = data.make_blobs(5, 8, 10, 0.0, seed=3)
    for ds in (train, val):
        for c in range(5):
            rows = ds.features[ds.labels == c]
            np.testing.assert_array_equal(rows, np.broadcast_to(rows[0], rows.shape))
            assert np.linalg.norm(rows[0]) == pytest.approx(1.0, abs=1e-12)
    assert data.nearest_mean_error(train, val) == 0.0


def test_blobs_deterministic():
    a = data.make_blobs(4, 6, 30, 0.2, seed=9)
    b = data.make_blobs(4, 6, 30, 0.2, seed=9)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.features, y.features)
        np.testing.assert_array_equal(x.labels, y.labels)


def test_blobs_balanced_and_split():
    train, val = data.make_blobs(10, 32, 50, 0.3, seed=0)
    assert len(train) == 400 and len(val) == 100
    counts = np.bincount(np.concatenate([train.labels, val.labels]), minlength=10)
    assert np.all(counts == 50)


def test_blobs_argument_checks():
    with pytest.raises(ValueError):
        data.make_blobs(1, 4, 10, 0.1, 0)
    with pytest.raises(ValueError):
        data.make_blobs(3, 1, 10, 0.1, 0)
    with pytest.raises(ValueError):
        data.make_blobs(3, 4, 10, -0.1, 0)


def test_blobs_nearest_mean_accuracy():
    # C=10, dim=32, sigma=0.3 with unit-norm means and per-coordinate noise
    train, val = data.make_blobs(10, 32, 500, 0.3, seed=0)
    assert 1.0 - data.nearest_mean_error(train, val) > 0.95


def test_blobs_bayes_error_floor():
    # Equal priors and isotropic noise: the true nearest mean is Bayes-optimal.
    # Its error is what any classifier is bounded by on this distribution.
    train, val = data.make_blobs(10, 32, 5000, 0.3, seed=0, val_fraction=0.0)
    means = projection._unit_rows(32, 10, derive_seed(0, 0xB10B)).q.T
    d = ((train.features[:, None, :] - means[None]) ** 2).sum(axis=-1)
    bayes = float(np.mean(np.argmin(d, axis=1) != train.labels))
    assert 0.06 < bayes < 0.10


def test_handcrafted_idx(tmp_path):
    img, lab = tmp_path / "i.idx", tmp_path / "l.idx"
    img.write_bytes(bytes([0, 0, 8, 3]) + struct.pack(">3I", 1, 2, 2) + bytes([0, 128, 255, 64]))
    lab.write_bytes(bytes([0, 0, 8, 1]) + struct.pack(">I", 1) + bytes([3]))
    ds = data.load_idx(img, lab)
    np.testing.assert_array_equal(ds.features, [[0.0, 128 / 255, 1.0, 64 / 255]])
    assert ds.labels.tolist() == [3] and ds.n_classes == 4


def test_idx_wrong_magic(tmp_path):
    img, lab = tmp_path / "i.idx", tmp_path / "l.idx"
    write_raw(img, 0x00000801, (1,), [0])
    write_raw(lab, 0x00000801, (1,), [0])
    with pytest.raises(data.IdxMagicError, match=str(img)):
        data.load_idx(img, lab)
    write_raw(img, 0x00000803, (1, 1, 1), [0])
    write_raw(lab, 0x00000803, (1, 1, 1), [0])
    with pytest.raises(data.IdxMagicError, match="offset 0"):
        data.load_idx(img, lab)


def test_idx_truncated(tmp_path):
    img, lab = tmp_path / "i.idx", tmp_path / "l.idx"
    write_raw(img, 0x00000803, (2, 2, 2), [1, 2, 3, 4, 5])
    write_raw(lab, 0x00000801, (2,), [0, 1])
    with pytest.raises(data.IdxTruncatedError, match="offset 21"):
        data.load_idx(img, lab)
    img.write_bytes(bytes([0, 0, 8, 3, 0, 0]))
    with pytest.raises(data.IdxTruncatedError):
        data.load_idx(img, lab)


def test_idx_length_mismatch(tmp_path):
    img, lab = tmp_path / "i.idx", tmp_path / "l.idx"
    write_raw(img, 0x00000803, (2, 1, 1), [1, 2])
    write_raw(lab, 0x00000801, (3,), [0, 1, 1])
    with pytest.raises(data.IdxLengthMismatchError, match=str(lab)):
        data.load_idx(img, lab)


def test_idx_errors_are_distinct():
    kinds = {data.IdxMagicError, data.IdxTruncatedError, data.IdxLengthMismatchError}
    assert len(kinds) == 3 and all(issubclass(k, data.IdxError) for k in kinds)


def test_idx_limit_takes_prefix(tmp_path, rng):
    n = 250
    feats = rng.integers(0, 256, (n, 6)).astype(np.float64) / 255.0
    labels = rng.integers(0, 10, n)
    labels[0] = 9
    ds = data.Dataset(feats, labels, 10)
    img, lab = tmp_path / "i.idx", tmp_path / "l.idx"
    data.write_idx(ds, img, lab, image_shape=(2, 3))
    part = data.load_idx(img, lab, limit=100)
    assert len(part) == 100
    np.testing.assert_array_equal(part.features, feats[:100])
    np.testing.assert_array_equal(part.labels, labels[:100])


def test_idx_round_trip_bit_exact(tmp_path, rng):
    feats = rng.uniform(0, 1, (40, 12))
    labels = np.arange(40) % 7
    ds = data.Dataset(data.quantize(feats) / 255.0, labels, 7)
    img, lab = tmp_path / "i.idx", tmp_path / "l.idx"
    data.write_idx(ds, img, lab)
    back = data.load_idx(img, lab)
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)
    assert back.n_classes == 7


def test_dataset_validation():
    with pytest.raises(ValueError):
        data.Dataset(np.zeros((3, 2)), np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        data.Dataset(np.zeros((2, 2)), np.array([0, 2]), 2)
