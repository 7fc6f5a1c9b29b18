"""Reconstruction quality metrics."""

import numpy as np

from .forward import PHASE_RANGE, affine_map

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class MetricError(ValueError):
    pass


def _pair(z, z_true):
    z = np.asarray(z, dtype=np.complex128)
    z_true = np.asarray(z_true, dtype=np.complex128)
    if z.shape != z_true.shape:
        raise MetricError(f"shapes differ: {z.shape} vs {z_true.shape}")
    return z, z_true


def relative_error(z, z_true):
    """``||z - z_true|| / ||z_true||`` over stacked real and imaginary parts."""
    z, z_true = _pair(z, z_true)
    ref = np.linalg.norm(z_true)
    if ref == 0:
        raise MetricError("reference field is identically zero")
    return float(np.linalg.norm(z - z_true) / ref)


def magnitude_rel_error(z, z_true):
    z, z_true = _pair(z, z_true)
    return relative_error(np.abs(z), np.abs(z_true))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Normalized 1D Gaussian taps; the 2D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _filter_valid(img, taps):
    # separable correlation, keeping only positions where the window fits
    k = len(taps)
    rows = sum(taps[i] * img[i:img.shape[0] - k + 1 + i, :] for i in range(k))
    return sum(taps[i] * rows[:, i:rows.shape[1] - k + 1 + i] for i in range(k))


def ssim(x, y, data_range, window=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Mean SSIM of two real images over all fully contained windows.

    ``y`` is the reference. Local statistics are Gaussian-weighted
    (population, not sample, covariance).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise MetricError("SSIM needs two 2D images of equal shape")
    if min(x.shape) < window:
        raise MetricError(f"image {x.shape} is smaller than the {window}x{window} window")
    taps = gaussian_window(window, sigma)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my = _filter_valid(x, taps), _filter_valid(y, taps)
    vx = _filter_valid(x * x, taps) - mx * mx
    vy = _filter_valid(y * y, taps) - my * my
    cxy = _filter_valid(x * y, taps) - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def _mapped_phase(z):
    phase = np.angle(z)
    if phase.max() == phase.min():
        return np.zeros_like(phase)
    return affine_map(phase, *PHASE_RANGE)


def phase_image(z):
    """Phase of ``z`` affinely mapped onto ``[0, pi/2]`` (constant phase gives 0)."""
    return _mapped_phase(np.asarray(z, dtype=np.complex128))


def phase_ssim(z, z_true):
    """SSIM between the mapped phases of ``z`` and ``z_true``.

    Both phases go through the same affine map onto ``[0, pi/2]`` and the
    dynamic range is ``pi/2``.
    """
    z, z_true = _pair(z, z_true)
    lo, hi = PHASE_RANGE
    return ssim(_mapped_phase(z), _mapped_phase(z_true), hi - lo)


def convergence_factor(phi_history, phi_star, j):
    """``((Phi_j - Phi*) / (Phi_0 - Phi*)) ** (1 / (j + 1))``."""
    phi = np.asarray(phi_history, dtype=np.float64)
    if not 0 <= j < len(phi):
        raise MetricError(f"index {j} outside a history of length {len(phi)}")
    gap0 = phi[0] - phi_star
    if gap0 <= 0:
        raise MetricError("initial value must exceed the reference optimum")
    gap = phi[j] - phi_star
    if gap < 0:
        raise MetricError("history value below the reference optimum")
    return float((gap / gap0) ** (1.0 / (j + 1)))
