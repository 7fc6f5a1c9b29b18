"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same name and signature in the
compiled ``_kernels`` extension. Arrays passed in must be C-contiguous;
``out`` arguments are overwritten.
"""

import numpy as np


def gather_windows(z, rows, cols, w, out):
    """Write ``Q_k z`` for every window into ``out[k]`` (zero outside)."""
    out[...] = 0
    for k in range(rows.shape[0]):
        r, c = rows[k], cols[k]
        out[k, r:r + w, c:c + w] = z[r:r + w, c:c + w]
    return out


def scatter_add_windows(stack, rows, cols, w, out):
    """Accumulate ``sum_k Q_k^T stack[k]`` into ``out`` in window order."""
    out[...] = 0
    for k in range(rows.shape[0]):
        r, c = rows[k], cols[k]
        out[r:r + w, c:c + w] += stack[k, r:r + w, c:c + w]
    return out


def _unit_phase(spec):
    # exp(i*theta(W)) with theta(0) := 0
    mag = np.abs(spec)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > 0, spec / safe, 1.0), mag


def modulus_project(spec, sqrt_d):
    """In place: ``spec <- sqrt_d * exp(i*theta(spec))``."""
    phase, _ = _unit_phase(spec)
    np.multiply(sqrt_d, phase, out=spec)
    return spec


def distance_residual(spec, sqrt_d):
    """In place: ``spec <- spec - sqrt_d * exp(i*theta(spec))``.

    Returns the sum of squared moduli of the result.
    """
    phase, mag = _unit_phase(spec)
    spec -= sqrt_d * phase
    return float(np.sum((mag - sqrt_d) ** 2))


def intensity_residual(spec, d):
    """In place: ``spec <- (|spec|^2 - d) * spec``; returns ``sum (|spec|^2 - d)^2``."""
    r = spec.real ** 2 + spec.imag ** 2 - d
    spec *= r
    return float(np.sum(r * r))


def restrict4(fine, out):
    """Four-point cell average of a ``2m x 2m`` complex grid into ``m x m``."""
    out[...] = 0.25 * (fine[0::2, 0::2] + fine[0::2, 1::2]
                       + fine[1::2, 0::2] + fine[1::2, 1::2])
    return out


def prolong2(coarse, out):
    """Copy each coarse pixel into its 2x2 fine block."""
    out[0::2, 0::2] = coarse
    out[0::2, 1::2] = coarse
    out[1::2, 0::2] = coarse
    out[1::2, 1::2] = coarse
    return out
