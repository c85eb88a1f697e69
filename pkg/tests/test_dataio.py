import gzip
import struct

import numpy as np
import pytest

from sgmca import SgmConfig, train
from sgmca.dataio import (
    CsvParseError,
    EmptyInputError,
    IdxDimensionError,
    IdxMagicError,
    IdxTruncatedError,
    ImageSet,
    ModelFormatError,
    decode_model,
    encode_idx,
    encode_model,
    load_images,
    load_matrix,
    load_model,
    parse_idx,
    read_idx,
    save_matrix,
    save_model,
    tile,
    write_idx,
)

from conftest import MNIST_IMAGES, MNIST_LABELS


def tile_grid(vec):
    return vec.reshape(7, 7)


def test_idx_round_trip(tmp_path, rng):
    images = rng.integers(0, 256, size=(2, 28, 28), dtype=np.uint8)
    labels = np.array([3, 7], dtype=np.uint8)
    for compress in (False, True):
        write_idx(tmp_path / "img", images, compress=compress)
        write_idx(tmp_path / "lab", labels, compress=compress)
        got = load_images(tmp_path / "img", tmp_path / "lab")
        np.testing.assert_array_equal(got.images, images)
        np.testing.assert_array_equal(got.labels, labels)


def test_idx_zero_image():
    raw = struct.pack(">I3I", 0x0803, 1, 28, 28) + bytes(784)
    arr = parse_idx(raw, ndim=3)
    assert arr.shape == (1, 28, 28)
    assert not arr.any()


def test_idx_errors():
    with pytest.raises(IdxTruncatedError):
        parse_idx(b"")
    with pytest.raises(IdxMagicError):
        parse_idx(struct.pack(">I3I", 0x01000803, 1, 28, 28) + bytes(784))
    with pytest.raises(IdxMagicError):
        parse_idx(struct.pack(">I3I", 0x0A03, 1, 28, 28) + bytes(784))
    with pytest.raises(IdxTruncatedError):
        parse_idx(struct.pack(">I3I", 0x0803, 2, 28, 28) + bytes(784))
    with pytest.raises(IdxDimensionError):
        parse_idx(struct.pack(">I3I", 0x0803, 1, 28, 28) + bytes(785))
    with pytest.raises(IdxDimensionError):
        parse_idx(struct.pack(">I3I", 0x0803, 1, 28, 28) + bytes(784), ndim=1)


def test_idx_other_dtypes(rng):
    for arr in (rng.normal(size=(3, 2)), rng.integers(-9, 9, size=5).astype(np.int32)):
        back = parse_idx(encode_idx(arr))
        assert back.dtype == arr.dtype
        np.testing.assert_array_equal(back, arr)


def test_write_idx_gzip_by_suffix(tmp_path):
    write_idx(tmp_path / "a.gz", np.arange(4, dtype=np.uint8))
    raw = (tmp_path / "a.gz").read_bytes()
    assert raw[:2] == b"\x1f\x8b"
    np.testing.assert_array_equal(parse_idx(gzip.decompress(raw)), np.arange(4))


def test_image_set_validation():
    with pytest.raises(ValueError):
        ImageSet(np.zeros((2, 28, 28), np.uint8), np.zeros(3, np.int64))
    with pytest.raises(ValueError):
        ImageSet(np.zeros((2, 27, 28), np.uint8), np.zeros(2, np.int64))


def test_tile_constant_image():
    t = tile(ImageSet(np.full((1, 28, 28), 128, np.uint8), np.zeros(1, np.int64)))
    for x in t.modalities:
        assert x.shape == (49, 1)
        np.testing.assert_allclose(x, 128 / 255, rtol=1e-15)


def test_tile_half_plane_image():
    img = np.zeros((1, 28, 28), np.uint8)
    img[:, :, :14] = 255
    x0, x1, x2 = tile(ImageSet(img, np.zeros(1, np.int64))).modalities
    np.testing.assert_array_equal(x1, 1.0)
    np.testing.assert_array_equal(x2, 0.0)
    g0 = tile_grid(x0[:, 0])
    np.testing.assert_array_equal(g0[:, :4], 1.0)
    np.testing.assert_array_equal(g0[:, 4:], 0.0)


def test_tile_overlap_consistency(rng):
    imgs = rng.integers(0, 256, size=(5, 28, 28), dtype=np.uint8)
    t = tile(ImageSet(imgs, np.zeros(5, np.int64)))
    for j in range(5):
        g0, g1, g2 = (tile_grid(x[:, j]) for x in t.modalities)
        np.testing.assert_array_equal(g0[:, 0:4], g1[:, 3:7])
        np.testing.assert_array_equal(g0[:, 4:7], g2[:, 0:3])
    again = tile(ImageSet(imgs, np.zeros(5, np.int64)))
    for a, b in zip(t.modalities, again.modalities):
        np.testing.assert_array_equal(a, b)


def test_mnist_fixture_loads():
    imgs = load_images(MNIST_IMAGES, MNIST_LABELS)
    assert imgs.count == 2000
    assert np.bincount(imgs.labels).tolist() == [200] * 10


def test_csv_round_trip(tmp_path, rng):
    M = rng.normal(size=(3, 4))
    save_matrix(tmp_path / "m.csv", M)
    np.testing.assert_array_equal(load_matrix(tmp_path / "m.csv"), M)


def test_csv_errors(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(EmptyInputError):
        load_matrix(tmp_path / "e.csv")
    (tmp_path / "r.csv").write_text("1,2,3\n4,5\n")
    with pytest.raises(CsvParseError, match="row 2"):
        load_matrix(tmp_path / "r.csv")
    (tmp_path / "x.csv").write_text("1,2\n3,abc\n")
    with pytest.raises(CsvParseError, match="row 2, column 2"):
        load_matrix(tmp_path / "x.csv")
    (tmp_path / "w.csv").write_text("1,2\n")
    with pytest.raises(CsvParseError, match="row 1"):
        load_matrix(tmp_path / "w.csv", expected_cols=3)


def trained_model(rng, m=2):
    data = [rng.normal(size=(5 + i, 12)) for i in range(m + 1)]
    w = tuple(np.full(m, 1.0 / m))
    return train(data, None, SgmConfig(3, w)), data


def test_model_round_trip_bit_exact(tmp_path, rng):
    model, data = trained_model(rng)
    save_model(tmp_path / "m.sgm", model)
    back = load_model(tmp_path / "m.sgm")
    assert encode_model(back) == encode_model(model)
    assert (back.m, back.k, back.dims, back.r_min) == (model.m, model.k, model.dims, model.r_min)
    assert back.trace_ratio == model.trace_ratio
    assert back.config == model.config
    for g, h, X in zip(model.maps, back.maps, data):
        assert np.array_equal(g(X), h(X))


def test_model_format_errors(rng):
    model, _ = trained_model(rng, m=1)
    raw = encode_model(model)
    with pytest.raises(ModelFormatError):
        decode_model(b"XXXX" + raw[4:])
    with pytest.raises(ModelFormatError):
        decode_model(raw[:-1])
    with pytest.raises(ModelFormatError):
        decode_model(raw + b"\0")
