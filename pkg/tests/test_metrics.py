import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptychomg.metrics import (MetricError, convergence_factor, gaussian_window, magnitude_rel_error,
                              phase_image, phase_ssim, relative_error, ssim)

from conftest import rand_field


def test_relative_error_cases(rng):
    t = rand_field(rng, 8)
    assert relative_error(t, t) == 0.0
    assert relative_error(np.zeros_like(t), t) == 1.0
    assert relative_error(2 * t, t) == 1.0
    with pytest.raises(MetricError):
        relative_error(t, np.zeros_like(t))
    with pytest.raises(MetricError):
        relative_error(t, rand_field(rng, 4))


def test_relative_error_permutation_invariant(rng):
    z, t = rand_field(rng, 8), rand_field(rng, 8)
    perm = rng.permutation(64)
    zp, tp = z.ravel()[perm].reshape(8, 8), t.ravel()[perm].reshape(8, 8)
    assert relative_error(zp, tp) == pytest.approx(relative_error(z, t), rel=1e-14)


def test_magnitude_error_cases(rng):
    t = rand_field(rng, 8)
    assert magnitude_rel_error(np.exp(0.4j) * t, t) == pytest.approx(0.0, abs=1e-15)
    assert magnitude_rel_error(np.zeros_like(t), t) == 1.0
    assert magnitude_rel_error(2 * np.abs(t) * np.exp(1j * rng.random((8, 8))), t) == pytest.approx(1.0)


def _phase_field(rng, n=16):
    return rng.random((n, n)) * np.exp(1j * rng.random((n, n)) * np.pi / 2) + 0.1


def test_phase_ssim_identity(rng):
    z = _phase_field(rng)
    assert phase_ssim(z, z) == 1.0


def test_phase_ssim_affine_invariance(rng):
    t = np.exp(1j * rng.random((16, 16)) * np.pi / 2)
    z = np.exp(1j * (0.3 * np.angle(t) - 0.2))
    assert phase_ssim(z, t) == pytest.approx(1.0, abs=1e-12)


def test_phase_ssim_degenerate_and_small(rng):
    t = np.exp(1j * rng.random((16, 16)))
    flat = np.ones((16, 16), complex)
    np.testing.assert_array_equal(phase_image(flat), 0)
    assert -1 <= phase_ssim(flat, t) <= 1
    with pytest.raises(MetricError):
        phase_ssim(rand_field(rng, 8), rand_field(rng, 8))


def _scalar_ssim(x, y, L):
    # window-by-window direct formula
    taps = gaussian_window()
    w2 = np.outer(taps, taps)
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    vals = []
    for i in range(x.shape[0] - 10):
        for j in range(x.shape[1] - 10):
            a, b = x[i:i + 11, j:j + 11], y[i:i + 11, j:j + 11]
            ma, mb = np.sum(w2 * a), np.sum(w2 * b)
            va, vb = np.sum(w2 * (a - ma) ** 2), np.sum(w2 * (b - mb) ** 2)
            cab = np.sum(w2 * (a - ma) * (b - mb))
            vals.append((2 * ma * mb + c1) * (2 * cab + c2) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return np.mean(vals)


def test_ssim_checkerboard_matches_direct_formula(rng):
    n = 16
    checker = (np.indices((n, n)).sum(axis=0) % 2) * (np.pi / 2)
    ref = rng.random((n, n)) * np.pi / 2
    got = ssim(checker, ref, np.pi / 2)
    assert got == pytest.approx(_scalar_ssim(checker, ref, np.pi / 2), abs=1e-10)


def test_ssim_matches_scikit_image(rng):
    skm = pytest.importorskip("skimage.metrics")
    x, y = rng.random((32, 32)), rng.random((32, 32))
    ref = skm.structural_similarity(x, y, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                    use_sample_covariance=False)
    assert ssim(x, y, 1.0) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_bounded(seed):
    rng = np.random.default_rng(seed)
    v = ssim(rng.random((12, 12)), rng.random((12, 12)), 1.0)
    assert -1 <= v <= 1


def test_convergence_factor_examples():
    hist = [1.0] + [0.5] * 8 + [1e-10]
    assert abs(convergence_factor(hist, 0.0, 9) - 0.1) <= 1e-15
    assert convergence_factor([3.0] * 5, 1.0, 4) == 1.0
    with pytest.raises(MetricError):
        convergence_factor([1.0, 0.5], 1.0, 1)
    with pytest.raises(MetricError):
        convergence_factor([1.0, 0.5], 0.0, 2)
    with pytest.raises(MetricError):
        convergence_factor([1.0, 0.5], 0.8, 1)
