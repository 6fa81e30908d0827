import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdfp_langevin.pgm_io import PgmError, read_pgm, write_pgm


def test_zero_image_round_trip(tmp_path):
    p = tmp_path / "z.pgm"
    write_pgm(p, np.zeros((3, 5)))
    np.testing.assert_array_equal(read_pgm(p), np.zeros((3, 5)))


def test_half_rounds_to_even(tmp_path):
    p = tmp_path / "h.pgm"
    write_pgm(p, np.full((1, 1), 0.5))
    raw = p.read_bytes()
    assert raw.startswith(b"P5\n1 1\n255\n") and raw[-1] == 128
    assert read_pgm(p)[0, 0] == 128 / 255


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([255, 65535]))
def test_round_trip_error(tmp_path_factory, seed, maxval):
    img = np.random.default_rng(seed).uniform(size=(7, 9))
    p = tmp_path_factory.mktemp("rt") / "x.pgm"
    write_pgm(p, img, maxval)
    assert np.abs(read_pgm(p) - img).max() <= 1 / (2 * maxval) + 1e-15


def test_out_of_range_is_clamped_and_flagged(tmp_path):
    p = tmp_path / "c.pgm"
    res = write_pgm(p, np.array([[-0.2, 1.4]]))
    assert res.clamped
    np.testing.assert_array_equal(read_pgm(p), [[0.0, 1.0]])
    assert not write_pgm(p, np.array([[0.0, 1.0]])).clamped


def test_header_with_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    np.testing.assert_array_equal(read_pgm(p), [[0.0, 1.0]])


@pytest.mark.parametrize("data", [b"P2\n1 1\n255\n\x00", b"P5\n1 1\n100\n\x00", b"P5\n2 2\n255\n\x00", b"P5\n1"])
def test_malformed_files(tmp_path, data):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(PgmError):
        read_pgm(p)


def test_write_rejects_bad_input(tmp_path):
    with pytest.raises(PgmError):
        write_pgm(tmp_path / "a.pgm", np.zeros(4))
    with pytest.raises(PgmError):
        write_pgm(tmp_path / "a.pgm", np.zeros((2, 2)), maxval=1000)
