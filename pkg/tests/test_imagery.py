import math

import numpy as np
import pytest

from sarchange.imagery import (
    PgmError,
    Raster,
    extract_patch,
    load_pgm,
    log_ratio,
    save_pgm,
)


# ---------------------------------------------------------------- raster

def test_raster_validation():
    with pytest.raises(ValueError, match="2-D"):
        Raster(np.zeros(4))
    with pytest.raises(ValueError, match="finite"):
        Raster(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError, match="non-negative"):
        Raster(np.array([[-1.0, 0.0]]))
    with pytest.raises(ValueError, match="non-empty"):
        Raster(np.zeros((0, 3)))


def test_raster_max_is_cached_per_image():
    r = Raster(np.array([[1.0, 7.0], [3.0, 2.0]]))
    assert r.max_value() == 7.0
    assert r.max_value() == 7.0


# ---------------------------------------------------------------- pgm io

def test_pgm_round_trip_8bit(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(9, 13)).astype(np.float64)
    p = tmp_path / "a.pgm"
    save_pgm(Raster(img), p)
    back = load_pgm(p)
    assert np.array_equal(back.pixels, img)


def test_pgm_round_trip_16bit(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.integers(0, 65536, size=(5, 7)).astype(np.float64)
    img[0, 0] = 65535.0  # force the wide range
    p = tmp_path / "b.pgm"
    save_pgm(Raster(img), p)
    back = load_pgm(p)
    assert np.array_equal(back.pixels, img)


def test_pgm_16bit_payload_is_big_endian(tmp_path):
    p = tmp_path / "c.pgm"
    save_pgm(Raster(np.array([[0x0102]], dtype=np.float64)), p)
    raw = p.read_bytes()
    assert raw.endswith(b"\x01\x02")
    assert raw.startswith(b"P5\n1 1\n65535\n")


def test_pgm_save_rounds_floats(tmp_path):
    p = tmp_path / "d.pgm"
    save_pgm(Raster(np.array([[1.4, 1.6, 200.9]])), p)
    assert np.array_equal(load_pgm(p).pixels, [[1.0, 2.0, 201.0]])


def test_pgm_save_rejects_overflow(tmp_path):
    with pytest.raises(ValueError, match="16-bit"):
        save_pgm(Raster(np.array([[70000.0]])), tmp_path / "e.pgm")


def test_pgm_header_comments_ok(tmp_path):
    p = tmp_path / "f.pgm"
    p.write_bytes(b"P5 # magic\n# a comment line\n3 # width\n2\n255\n" + bytes(6))
    img = load_pgm(p)
    assert img.width == 3 and img.height == 2
    assert np.array_equal(img.pixels, np.zeros((2, 3)))


def test_pgm_payload_may_start_with_whitespace_byte(tmp_path):
    # Pixel value 10 is '\n'; only one separator byte is consumed.
    p = tmp_path / "g.pgm"
    p.write_bytes(b"P5\n2 1\n255\n" + bytes([10, 32]))
    assert np.array_equal(load_pgm(p).pixels, [[10.0, 32.0]])


def test_pgm_rejects_ascii_magic(tmp_path):
    p = tmp_path / "h.pgm"
    p.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(PgmError, match="P5"):
        load_pgm(p)


def test_pgm_truncation_reports_byte_offset(tmp_path):
    p = tmp_path / "i.pgm"
    p.write_bytes(b"P5\n4 2\n255\n" + bytes(5))
    with pytest.raises(PgmError, match=r"byte 16"):
        load_pgm(p)


def test_pgm_bad_header_token(tmp_path):
    p = tmp_path / "j.pgm"
    p.write_bytes(b"P5\nfour 2\n255\n")
    with pytest.raises(PgmError, match="width"):
        load_pgm(p)


def test_pgm_maxval_ceiling(tmp_path):
    p = tmp_path / "k.pgm"
    p.write_bytes(b"P5\n1 1\n70000\n\x00\x00")
    with pytest.raises(PgmError, match="maxval"):
        load_pgm(p)


# ---------------------------------------------------------------- log ratio

def test_log_ratio_matches_hand_computation():
    i1 = Raster(np.array([[1.0, 2.0], [3.0, 4.0]]))
    i2 = Raster(np.array([[2.0, 1.0], [3.0, 8.0]]))
    raw = np.array([
        [abs(math.log(2.0) - math.log(3.0)), abs(math.log(3.0) - math.log(2.0))],
        [0.0, abs(math.log(5.0) - math.log(9.0))],
    ])
    want = (raw - raw.min()) / (raw.max() - raw.min())
    got = log_ratio(i1, i2).values
    assert np.allclose(got, want, atol=1e-12, rtol=0)


def test_log_ratio_identical_images_all_zero():
    img = Raster(np.arange(12.0).reshape(3, 4))
    assert np.array_equal(log_ratio(img, img).values, np.zeros((3, 4)))


def test_log_ratio_symmetric_in_arguments():
    rng = np.random.default_rng(2)
    a = Raster(rng.uniform(0, 300, size=(8, 8)))
    b = Raster(rng.uniform(0, 300, size=(8, 8)))
    assert np.allclose(log_ratio(a, b).values, log_ratio(b, a).values, atol=1e-15, rtol=0)


def test_log_ratio_range_and_extremes():
    rng = np.random.default_rng(3)
    a = Raster(rng.uniform(0, 500, size=(10, 10)))
    b = Raster(rng.uniform(0, 500, size=(10, 10)))
    v = log_ratio(a, b).values
    assert v.min() == 0.0 and v.max() == 1.0


def test_log_ratio_is_pixelwise_before_normalization():
    # Jointly permuting the input pixels permutes the output the same way.
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 99, size=(6, 5))
    b = rng.uniform(0, 99, size=(6, 5))
    base = log_ratio(Raster(a), Raster(b)).values
    perm = rng.permutation(30)
    pa = a.reshape(-1)[perm].reshape(6, 5)
    pb = b.reshape(-1)[perm].reshape(6, 5)
    want = base.reshape(-1)[perm].reshape(6, 5)
    got = log_ratio(Raster(pa), Raster(pb)).values
    assert np.array_equal(got, want)


def test_log_ratio_geometry_mismatch():
    with pytest.raises(ValueError, match="differ"):
        log_ratio(Raster(np.zeros((2, 3))), Raster(np.zeros((3, 2))))


# ---------------------------------------------------------------- patches

def test_patch_interior_matches_slice():
    rng = np.random.default_rng(5)
    a = rng.uniform(0, 200, size=(12, 12))
    b = rng.uniform(0, 100, size=(12, 12))
    patch = extract_patch(Raster(a), Raster(b), (6, 5), 5)
    assert patch.data.data.shape == (2, 5, 5)
    assert np.allclose(patch.data.data[0], a[4:9, 3:8] / a.max(), atol=1e-15, rtol=0)
    assert np.allclose(patch.data.data[1], b[4:9, 3:8] / b.max(), atol=1e-15, rtol=0)


def test_patch_corner_replicates_edges():
    a = np.arange(16.0).reshape(4, 4)
    patch = extract_patch(Raster(a), Raster(a), (0, 0), 5)
    ch = patch.data.data[0] * a.max()
    # Rows/cols clipped to the border: index pattern 0,0,0,1,2.
    idx = np.clip(np.arange(-2, 3), 0, 3)
    want = a[np.ix_(idx, idx)]
    assert np.allclose(ch, want, atol=1e-12, rtol=0)


def test_patch_scaling_bounds_and_zero_image():
    zero = Raster(np.zeros((6, 6)))
    lit = Raster(np.full((6, 6), 40.0))
    p = extract_patch(zero, lit, (3, 3), 3)
    assert np.array_equal(p.data.data[0], np.zeros((3, 3)))
    assert np.array_equal(p.data.data[1], np.ones((3, 3)))


def test_patch_argument_validation():
    img = Raster(np.ones((5, 5)))
    with pytest.raises(ValueError, match="odd"):
        extract_patch(img, img, (2, 2), 4)
    with pytest.raises(ValueError, match="outside"):
        extract_patch(img, img, (5, 0), 3)
    with pytest.raises(ValueError, match="differ"):
        extract_patch(img, Raster(np.ones((4, 5))), (2, 2), 3)
