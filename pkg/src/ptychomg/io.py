"""Image and data files.

Formats
-------
PGM
    Binary ``P5`` greyscale, maxval 255. Loading maps samples to ``[0, 1]``.
Raw float (``.ptyf``)
    16-byte header: magic ``b"PTYF"``, ``u32`` little-endian ``n``, ``u32``
    little-endian channel count, 4 reserved zero bytes; then ``channels``
    planes of ``n * n`` little-endian float64 values, row-major. A real grid
    has one channel; a complex field has two (real plane, then imaginary
    plane); a diffraction stack has one channel per pattern.
Convergence CSV
    Header ``cycle,weighted_evals,phi,rel_err,mag_err,phase_ssim``; floats are
    written with ``repr`` so files round-trip exactly.
"""

import csv
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PTYF"
_HEADER = struct.Struct("<4sII4x")
CSV_COLUMNS = ("cycle", "weighted_evals", "phi", "rel_err", "mag_err", "phase_ssim")


class FormatError(ValueError):
    """Malformed or unexpected file contents."""


def _pgm_tokens(buf):
    # header tokens are whitespace separated; '#' starts a comment to end of line
    tokens, pos = [], 0
    while len(tokens) < 4:
        if pos >= len(buf):
            raise FormatError("truncated PGM header")
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def load_pgm(path):
    """Raw ``uint8`` samples of a binary PGM file."""
    buf = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(buf)
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    raster = buf[offset:offset + width * height]
    if len(raster) != width * height:
        raise FormatError(f"{path}: truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def save_pgm(path, pixels):
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("PGM pixels must be a 2D uint8 array")
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def write_raw(path, planes):
    """Write ``planes`` (shape ``(channels, n, n)`` or ``(n, n)``) as raw float."""
    planes = np.asarray(planes, dtype="<f8")
    if planes.ndim == 2:
        planes = planes[None]
    c, n, m = planes.shape
    if n != m:
        raise ValueError("raw-float planes must be square")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, c))
        fh.write(np.ascontiguousarray(planes).tobytes())


def read_raw(path):
    """Return planes of shape ``(channels, n, n)``."""
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, n, c = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * c * n * n
    if len(buf) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(buf)}")
    return np.frombuffer(buf, dtype="<f8", offset=_HEADER.size).reshape(c, n, n).astype(np.float64)


def load_image(path, n=None):
    """Real grid from a PGM (scaled to [0, 1]) or single-channel raw-float file."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        planes = read_raw(path)
        if planes.shape[0] != 1:
            raise FormatError(f"{path}: expected a single-channel image, found {planes.shape[0]}")
        grid = planes[0]
    else:
        grid = load_pgm(path).astype(np.float64) / 255.0
    if n is not None and grid.shape != (n, n):
        raise FormatError(f"{path}: image is {grid.shape[0]}x{grid.shape[1]}, expected {n}x{n}")
    return grid


def save_image(grid, path):
    """Write ``grid`` as an 8-bit PGM (min..max stretched to 0..255) plus a
    lossless ``.ptyf`` companion. Returns both paths."""
    grid = np.asarray(grid, dtype=np.float64)
    path = Path(path)
    lo, hi = grid.min(), grid.max()
    scaled = np.zeros_like(grid) if hi == lo else (grid - lo) * (255.0 / (hi - lo))
    save_pgm(path, np.clip(np.rint(scaled), 0, 255).astype(np.uint8))
    raw = path.with_suffix(".ptyf")
    write_raw(raw, grid)
    return path, raw


def save_field(path, z):
    z = np.asarray(z)
    write_raw(path, np.stack([z.real, z.imag]))


def load_field(path):
    planes = read_raw(path)
    if planes.shape[0] != 2:
        raise FormatError(f"{path}: a complex field needs 2 channels, found {planes.shape[0]}")
    return planes[0] + 1j * planes[1]


def save_stack(path, stack):
    write_raw(path, stack.patterns)


def load_stack(path):
    from .forward import DiffractionStack

    return DiffractionStack(read_raw(path))


def write_history_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([rec.cycle] + [repr(float(getattr(rec, c))) for c in CSV_COLUMNS[1:]])


def read_history_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise FormatError(f"{path}: unexpected CSV header {header}")
        return [dict(zip(CSV_COLUMNS, [int(r[0])] + [float(x) for x in r[1:]])) for r in reader]
