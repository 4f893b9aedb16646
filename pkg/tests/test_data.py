import gzip
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rscnet.data import (
    CIFAR_RECORD,
    DataFormatError,
    find_idx_pair,
    load_cifar10,
    load_csv,
    load_idx,
    normalize_rows,
    save_csv,
    subsample,
    synthetic,
    write_idx_images,
    write_idx_labels,
)


def make_idx(tmp_path, n=5, rows=4, cols=3, seed=0, gz=False):
    rng = np.random.default_rng(seed)
    imgs = rng.integers(1, 256, size=(n, rows, cols), dtype=np.uint8)
    labels = rng.integers(0, 10, size=n, dtype=np.uint8)
    write_idx_images(tmp_path / "train-images-idx3-ubyte", imgs)
    write_idx_labels(tmp_path / "train-labels-idx1-ubyte", labels)
    if gz:
        for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
            p = tmp_path / name
            (tmp_path / (name + ".gz")).write_bytes(gzip.compress(p.read_bytes()))
            p.unlink()
    return imgs, labels


def test_idx_header_layout(tmp_path):
    make_idx(tmp_path)
    raw = (tmp_path / "train-images-idx3-ubyte").read_bytes()
    # big-endian int32 magic 0x00000803 followed by count, rows, cols
    assert raw[:4] == b"\x00\x00\x08\x03" and struct.unpack(">iii", raw[4:16]) == (5, 4, 3)
    assert (tmp_path / "train-labels-idx1-ubyte").read_bytes()[:4] == b"\x00\x00\x08\x01"


@pytest.mark.parametrize("gz", [False, True])
def test_load_idx_normalizes_and_maps_labels(tmp_path, gz):
    imgs, labels = make_idx(tmp_path, gz=gz)
    ds = load_idx(*find_idx_pair(tmp_path))
    assert ds.X.shape == (5, 12)
    assert np.max(np.abs(np.sum(ds.X**2, axis=1) - 12)) < 1e-9 * 12
    np.testing.assert_allclose(ds.y, labels / 4.5 - 1)
    assert np.all(np.abs(ds.y) <= 1)
    ref = imgs.reshape(5, -1) / 255.0
    np.testing.assert_allclose(ds.X, ref * (math.sqrt(12) / np.linalg.norm(ref, axis=1))[:, None])


def test_idx_errors(tmp_path):
    make_idx(tmp_path)
    img = tmp_path / "train-images-idx3-ubyte"
    lab = tmp_path / "train-labels-idx1-ubyte"
    with pytest.raises(DataFormatError, match="magic"):
        load_idx(lab, lab)
    raw = img.read_bytes()
    (tmp_path / "short").write_bytes(raw[:-3])
    with pytest.raises(DataFormatError, match="truncated"):
        load_idx(tmp_path / "short", lab)
    write_idx_labels(tmp_path / "lab4", np.zeros(4, dtype=np.uint8))
    with pytest.raises(DataFormatError, match="labels"):
        load_idx(img, tmp_path / "lab4")
    write_idx_images(tmp_path / "black", np.zeros((2, 2, 2), dtype=np.uint8))
    write_idx_labels(tmp_path / "lab2", np.zeros(2, dtype=np.uint8))
    with pytest.raises(DataFormatError, match="zeros"):
        load_idx(tmp_path / "black", tmp_path / "lab2")
    with pytest.raises(FileNotFoundError):
        find_idx_pair(tmp_path / "nowhere")


def test_cifar(tmp_path):
    rng = np.random.default_rng(1)
    recs = rng.integers(1, 256, size=(10, CIFAR_RECORD), dtype=np.uint8)
    recs[:, 0] = np.arange(10)
    (tmp_path / "b.bin").write_bytes(recs.tobytes())
    ds = load_cifar10(tmp_path / "b.bin", records=10)
    assert ds.d == 3072
    np.testing.assert_allclose(np.sum(ds.X**2, axis=1), 3072, rtol=1e-12)
    np.testing.assert_allclose(ds.y, np.arange(10) / 4.5 - 1)
    (tmp_path / "t.bin").write_bytes(recs.tobytes()[:-1])
    with pytest.raises(DataFormatError):
        load_cifar10(tmp_path / "t.bin", records=10)
    with pytest.raises(DataFormatError):
        load_cifar10(tmp_path / "b.bin")


def test_subsample():
    ds = synthetic(20, 4, 0)
    full = subsample(ds, 20, 3)
    assert sorted(map(tuple, full.X)) == sorted(map(tuple, ds.X))
    a, b = subsample(ds, 7, 11), subsample(ds, 7, 11)
    np.testing.assert_array_equal(a.X, b.X)
    with pytest.raises(ValueError):
        subsample(ds, 21, 0)


def test_synthetic_near_orthogonal():
    fails = 0
    for seed in range(100):
        ds = synthetic(64, 512, seed)
        assert np.max(np.abs(np.sum(ds.X**2, axis=1) - 512)) < 1e-9 * 512
        assert np.all(np.abs(ds.y) <= 1)
        G = ds.X @ ds.X.T / 512
        np.fill_diagonal(G, 0)
        fails += np.max(np.abs(G)) >= 0.5
    assert fails <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8), st.integers(1, 6))
def test_csv_roundtrip_and_idempotent_normalization(tmp_path_factory, seed, n, d):
    ds = synthetic(n, d, seed)
    path = tmp_path_factory.mktemp("csv") / "ds.csv"
    save_csv(ds, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_allclose(normalize_rows(ds.X), ds.X, rtol=1e-15, atol=1e-15)


def test_csv_header_required(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DataFormatError):
        load_csv(tmp_path / "x.csv")
