"""Complex grids, the DFT pair, binary probe windows and raster scans.

A complex field is an ``(n, n)`` ``complex128`` numpy array. The forward DFT
is unnormalized and the inverse carries the ``1/n**2`` factor (numpy's
default convention), so ``ifft2(fft2(f)) == f``.
"""

from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Raised for probe windows or scans that do not fit the object grid."""


def as_field(values):
    """Return ``values`` as a C-contiguous square complex128 array."""
    f = np.ascontiguousarray(values, dtype=np.complex128)
    if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[0] < 1:
        raise ValueError(f"expected a non-empty square 2D grid, got shape {f.shape}")
    return f


def fft2(field):
    """Unnormalized forward 2D DFT over the last two axes."""
    return np.fft.fft2(field)


def ifft2(field):
    """Inverse of :func:`fft2` (includes the ``1/n**2`` factor)."""
    return np.fft.ifft2(field)


def real_inner(a, b):
    """Real inner product of stacked (real, imag) parts: ``Re <a, b>``."""
    return float(np.vdot(a, b).real)


@dataclass(frozen=True)
class ProbeWindow:
    """Square binary illumination window; 1 inside, 0 outside."""

    row0: int
    col0: int
    width: int

    def check(self, n):
        if self.width < 1 or self.row0 < 0 or self.col0 < 0:
            raise GeometryError(f"invalid window {self}")
        if self.row0 + self.width > n or self.col0 + self.width > n:
            raise GeometryError(f"window {self} does not fit a {n}x{n} grid")

    @property
    def slices(self):
        return (slice(self.row0, self.row0 + self.width),
                slice(self.col0, self.col0 + self.width))

    def mask(self, n):
        m = np.zeros((n, n))
        m[self.slices] = 1.0
        return m


def apply_probe(field, window):
    """Return ``Q_k z``: the field inside ``window``, zero elsewhere."""
    field = np.asarray(field)
    window.check(field.shape[-1])
    out = np.zeros_like(field)
    rs, cs = window.slices
    out[..., rs, cs] = field[..., rs, cs]
    return out


@dataclass(frozen=True)
class ScanGeometry:
    n: int
    window_size: int
    stride: int
    windows: tuple

    def __post_init__(self):
        for w in self.windows:
            w.check(self.n)
        if any(w.width != self.window_size for w in self.windows):
            raise GeometryError("all windows of a scan must share one width")

    @property
    def num_probes(self):
        return len(self.windows)

    @property
    def rows(self):
        return np.array([w.row0 for w in self.windows], dtype=np.intp)

    @property
    def cols(self):
        return np.array([w.col0 for w in self.windows], dtype=np.intp)

    @property
    def overlap(self):
        """Fractional overlap of consecutive windows along a scan row."""
        return (self.window_size - self.stride) / self.window_size

    def coverage(self):
        """Number of windows covering each pixel."""
        count = np.zeros((self.n, self.n), dtype=np.int64)
        for w in self.windows:
            count[w.slices] += 1
        return count


def generate_raster_scan(n, window_size, stride):
    """Serpentine raster of square windows starting at the top-left corner.

    The first row is scanned left to right, the next right to left, and so on
    until the grid is covered. A scan whose window fills the grid has a
    single position regardless of ``stride``.
    """
    if n < 1 or window_size < 1 or window_size > n:
        raise GeometryError(f"window size {window_size} does not fit n={n}")
    if stride < 1:
        raise GeometryError("stride must be positive")
    span = n - window_size
    if span == 0:
        offsets = [0]
    else:
        if span % stride:
            raise GeometryError(f"stride {stride} does not divide n - window = {span}")
        if stride > window_size:
            raise GeometryError(f"stride {stride} exceeds window {window_size}; the scan would leave gaps")
        offsets = list(range(0, span + 1, stride))
    windows = []
    for i, r in enumerate(offsets):
        row = offsets if i % 2 == 0 else offsets[::-1]
        windows.extend(ProbeWindow(r, c, window_size) for c in row)
    return ScanGeometry(n, window_size, stride, tuple(windows))


def standard_scan(n):
    """The half-size window, quarter-size stride scan (9 probes, 50% overlap)."""
    if n % 4:
        raise GeometryError(f"n={n} must be a multiple of 4")
    return generate_raster_scan(n, n // 2, n // 4)
