import numpy as np
import pytest

from ptychomg import io
from ptychomg.experiment import ConvergenceRecord
from ptychomg.forward import DiffractionStack


def test_pgm_zero_and_max(tmp_path):
    p = tmp_path / "z.pgm"
    io.save_pgm(p, np.zeros((3, 4), np.uint8))
    np.testing.assert_array_equal(io.load_image(p), np.zeros((3, 4)))
    p.write_bytes(b"P5\n1 1\n255\n\xff")
    assert io.load_image(p)[0, 0] == 1.0


def test_pgm_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1 # width height\n255\n\x00\x80")
    np.testing.assert_allclose(io.load_image(p), [[0.0, 128 / 255]])


@pytest.mark.parametrize("blob", [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00", b"P5\n1"])
def test_pgm_malformed(tmp_path, blob):
    p = tmp_path / "bad.pgm"
    p.write_bytes(blob)
    with pytest.raises(io.FormatError):
        io.load_image(p)


def test_image_size_check(tmp_path):
    p = tmp_path / "a.pgm"
    io.save_pgm(p, np.zeros((4, 4), np.uint8))
    with pytest.raises(io.FormatError):
        io.load_image(p, n=8)


def test_raw_round_trip_bitwise(tmp_path, rng):
    grid = rng.standard_normal((8, 8))
    io.write_raw(tmp_path / "g.ptyf", grid)
    back = io.load_image(tmp_path / "g.ptyf")
    assert back.tobytes() == grid.tobytes()
    raw = (tmp_path / "g.ptyf").read_bytes()
    assert raw[:4] == b"PTYF" and int.from_bytes(raw[4:8], "little") == 8
    assert int.from_bytes(raw[8:12], "little") == 1 and len(raw) == 16 + 8 * 64


def test_save_image_outputs(tmp_path, rng):
    grid = rng.random((8, 8)) * 3 - 1
    pgm, raw = io.save_image(grid, tmp_path / "img.pgm")
    px = io.load_pgm(pgm)
    assert px.min() == 0 and px.max() == 255
    assert io.load_image(raw).tobytes() == grid.tobytes()
    io.save_image(np.ones((4, 4)), tmp_path / "flat.pgm")
    assert not np.any(io.load_pgm(tmp_path / "flat.pgm"))


def test_field_and_stack_round_trip(tmp_path, rng):
    z = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    io.save_field(tmp_path / "f.ptyf", z)
    assert io.load_field(tmp_path / "f.ptyf").tobytes() == z.tobytes()
    stack = DiffractionStack(rng.random((9, 8, 8)))
    io.save_stack(tmp_path / "s.ptyf", stack)
    assert io.load_stack(tmp_path / "s.ptyf").patterns.tobytes() == stack.patterns.tobytes()
    with pytest.raises(io.FormatError):
        io.load_field(tmp_path / "s.ptyf")
    with pytest.raises(io.FormatError):
        io.load_image(tmp_path / "f.ptyf")


def test_raw_corruption(tmp_path):
    p = tmp_path / "x.ptyf"
    io.write_raw(p, np.zeros((2, 2)))
    data = p.read_bytes()
    p.write_bytes(data[:-1])
    with pytest.raises(io.FormatError):
        io.read_raw(p)
    p.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(io.FormatError):
        io.read_raw(p)
    p.write_bytes(b"PT")
    with pytest.raises(io.FormatError):
        io.read_raw(p)


def test_history_csv_round_trip(tmp_path):
    recs = [ConvergenceRecord(0, 1.0, 2.5, 0.1, 0.2, 0.3, 1.0),
            ConvergenceRecord(1, 2.25, 1 / 3, 0.05, 0.01, 0.9, 0.7)]
    path = tmp_path / "h.csv"
    io.write_history_csv(path, recs)
    assert path.read_text().splitlines()[0] == "cycle,weighted_evals,phi,rel_err,mag_err,phase_ssim"
    rows = io.read_history_csv(path)
    assert rows[1]["phi"] == 1 / 3 and rows[1]["cycle"] == 1
    path.write_text("a,b\n1,2\n")
    with pytest.raises(io.FormatError):
        io.read_history_csv(path)
