"""Ground truth construction, noise-free data simulation and noise injection."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .field import as_field, fft2

PHASE_RANGE = (0.0, np.pi / 2)


@dataclass
class DiffractionStack:
    """``N`` nonnegative ``n x n`` intensity patterns, one per probe."""

    patterns: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.patterns, dtype=np.float64)
        if p.ndim != 3 or p.shape[1] != p.shape[2]:
            raise ValueError(f"patterns must have shape (N, n, n), got {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("intensity patterns must be finite and nonnegative")
        self.patterns = p

    @property
    def n(self):
        return self.patterns.shape[1]

    @property
    def num_patterns(self):
        return self.patterns.shape[0]


@dataclass(frozen=True)
class NoiseSpec:
    level: float
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError("noise level must be nonnegative")


@dataclass
class GroundTruth:
    object: np.ndarray
    magnitude_range: tuple
    phase_range: tuple = PHASE_RANGE


def affine_map(values, lo, hi):
    """Map ``values`` from their own ``[min, max]`` onto ``[lo, hi]``.

    A constant input has no well-defined map and is sent to ``lo``.
    """
    values = np.asarray(values, dtype=np.float64)
    vmin, vmax = values.min(), values.max()
    if vmax == vmin:
        return np.full_like(values, lo)
    return lo + (values - vmin) * ((hi - lo) / (vmax - vmin))


def build_ground_truth(mag_image, phase_image, mag_floor=0.0):
    mag_image = np.asarray(mag_image, dtype=np.float64)
    phase_image = np.asarray(phase_image, dtype=np.float64)
    if mag_image.shape != phase_image.shape:
        raise ValueError(f"image sizes differ: {mag_image.shape} vs {phase_image.shape}")
    if not (np.all(np.isfinite(mag_image)) and np.all(np.isfinite(phase_image))):
        raise ValueError("images must be finite")
    if mag_image.max() == mag_image.min():
        mag = np.ones_like(mag_image)
    else:
        mag = affine_map(mag_image, mag_floor, 1.0)
    phase = affine_map(phase_image, *PHASE_RANGE)
    obj = as_field(mag * np.exp(1j * phase))
    return GroundTruth(obj, (float(mag.min()), float(mag.max())))


def exit_waves(z, geometry):
    """Stack of ``Q_k z`` for every probe, shape ``(N, n, n)``."""
    z = as_field(z)
    if z.shape[0] != geometry.n:
        raise ValueError(f"object is {z.shape[0]}x{z.shape[0]}, geometry expects n={geometry.n}")
    out = np.empty((geometry.num_probes, geometry.n, geometry.n), dtype=np.complex128)
    kernels.gather_windows(z, geometry.rows, geometry.cols, geometry.window_size, out)
    return out


def simulate(z, geometry):
    """Noise-free intensities ``|F(Q_k z)|^2``."""
    spec = fft2(exit_waves(z, geometry))
    return DiffractionStack(spec.real ** 2 + spec.imag ** 2)


def noise_realization(stack, spec):
    """The unclamped noise terms ``eps_k``, shape ``(N, n, n)``.

    For pattern ``d_k`` a standard normal draw ``g_k`` is scaled so that
    ``||eps_k|| = level * ||d_k||``. Draws come from numpy's PCG64 generator
    seeded with ``spec.seed``, one pattern at a time in stack order.
    """
    rng = np.random.default_rng(spec.seed)
    eps = np.empty_like(stack.patterns)
    for k, d in enumerate(stack.patterns):
        g = rng.standard_normal(d.shape)
        eps[k] = (spec.level * np.linalg.norm(d) / np.linalg.norm(g)) * g
    return eps


def add_noise(stack, spec):
    """Relative Gaussian noise per pattern, clamped at zero."""
    if spec.level == 0:
        return DiffractionStack(stack.patterns.copy())
    return DiffractionStack(np.maximum(stack.patterns + noise_realization(stack, spec), 0.0))
