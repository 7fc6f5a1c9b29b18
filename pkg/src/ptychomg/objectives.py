"""Distance and intensity-Gaussian objectives with their Wirtinger gradients.

Gradients of a real function ``Phi(x + iy)`` are returned as the complex field
``dPhi/dx + i dPhi/dy``, so the directional derivative along ``u`` is
``real_inner(grad, u)``.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .field import apply_probe, as_field, fft2, ifft2, real_inner
from .forward import exit_waves

DISTANCE = "distance"
INTENSITY = "intensity"
KINDS = (DISTANCE, INTENSITY)


class DomainError(ValueError):
    pass


@dataclass
class ObjectiveEval:
    value: float
    gradient: np.ndarray


def project_modulus(z, window, d_k):
    """Project onto the measurement set of one probe.

    The spectrum of ``Q_k z`` keeps its phase and takes modulus ``sqrt(d_k)``;
    zero spectral entries get phase 0.
    """
    z = as_field(z)
    d_k = np.asarray(d_k, dtype=np.float64)
    if d_k.shape != z.shape:
        raise ValueError(f"pattern shape {d_k.shape} does not match field {z.shape}")
    if np.any(d_k < 0):
        raise DomainError("intensity data must be nonnegative")
    spec = np.ascontiguousarray(fft2(apply_probe(z, window))[None])
    kernels.modulus_project(spec, np.ascontiguousarray(np.sqrt(d_k))[None])
    return ifft2(spec[0])


def _back_project(spec_stack, geometry):
    back = np.ascontiguousarray(ifft2(spec_stack))
    grad = np.empty((geometry.n, geometry.n), dtype=np.complex128)
    kernels.scatter_add_windows(back, geometry.rows, geometry.cols, geometry.window_size, grad)
    return grad


def _distance(z, geometry, sqrt_d):
    # ||P_k z - Q_k z||^2 = ||W_k - sqrt(d_k) e^{i theta(W_k)}||^2 / n^2 (Parseval),
    # gradient sum_k Q_k (Q_k z - P_k z) = sum_k Q_k ifft2(residual spectrum).
    n = geometry.n
    spec = np.ascontiguousarray(fft2(exit_waves(z, geometry)))
    total = kernels.distance_residual(spec, sqrt_d)
    return ObjectiveEval(0.5 * total / (n * n), _back_project(spec, geometry))


def _intensity(z, geometry, d):
    # gradient 2 sum_k Q_k F^H(r_k * W_k), F^H = n^2 ifft2
    n = geometry.n
    spec = np.ascontiguousarray(fft2(exit_waves(z, geometry)))
    total = kernels.intensity_residual(spec, d)
    grad = _back_project(spec, geometry)
    grad *= 2.0 * n * n
    return ObjectiveEval(0.5 * total, grad)


def _check_data(geometry, data):
    if data.n != geometry.n or data.num_patterns != geometry.num_probes:
        raise ValueError(
            f"data ({data.num_patterns} x {data.n}^2) does not match geometry "
            f"({geometry.num_probes} probes, n={geometry.n})")


def phi_distance(z, geometry, data):
    """``1/2 sum_k ||P_k(z) - Q_k z||^2`` and its gradient."""
    _check_data(geometry, data)
    return _distance(z, geometry, np.sqrt(data.patterns))


def phi_intensity_gaussian(z, geometry, data):
    """``1/2 sum_k || |F Q_k z|^2 - d_k ||^2`` and its gradient."""
    _check_data(geometry, data)
    return _intensity(z, geometry, data.patterns)


class Objective:
    """A ptychographic objective on one grid, optionally with a linear shift.

    Calling the objective returns ``Phi(z) - <v, z>_R`` and ``grad Phi(z) - v``.
    ``level`` and ``n`` are used for evaluation accounting.
    """

    def __init__(self, kind, geometry, data, shift=None, level=0):
        if kind not in KINDS:
            raise ValueError(f"objective kind must be one of {KINDS}, got {kind!r}")
        _check_data(geometry, data)
        if shift is not None:
            shift = as_field(shift)
            if shift.shape[0] != geometry.n:
                raise ValueError("shift size does not match the grid")
        self.kind = kind
        self.geometry = geometry
        self.data = data
        self.shift = shift
        self.level = level
        self._work = np.sqrt(data.patterns) if kind == DISTANCE else data.patterns

    @property
    def n(self):
        return self.geometry.n

    def shifted(self, v):
        """Same objective with linear term ``v`` (replacing any existing one)."""
        other = object.__new__(Objective)
        other.__dict__.update(self.__dict__)
        other.shift = None if v is None else as_field(v)
        return other

    def unshifted(self):
        return self.shifted(None)

    def evaluate(self, z):
        """Unshifted value and gradient."""
        if self.kind == DISTANCE:
            return _distance(z, self.geometry, self._work)
        return _intensity(z, self.geometry, self._work)

    def __call__(self, z):
        return eval_shifted(self, z)


def eval_shifted(obj, z):
    base = obj.evaluate(z)
    v = obj.shift
    if v is None:
        return base
    if v.shape != np.shape(z):
        raise ValueError("shift and iterate sizes differ")
    return ObjectiveEval(base.value - real_inner(v, z), base.gradient - v)
