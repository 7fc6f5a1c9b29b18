import numpy as np
import pytest

from ptychomg import _kernels_py, kernels
from ptychomg.field import standard_scan
from ptychomg.forward import simulate
from ptychomg.objectives import DISTANCE, INTENSITY, Objective

from conftest import rand_field

compiled = pytest.mark.skipif("cython" not in kernels.available_backends(),
                              reason="compiled kernels not built")


def test_backend_selection():
    assert kernels.BACKEND in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    assert kernels.get_backend("python") is _kernels_py


def test_use_backend_restores():
    before = kernels.BACKEND
    with kernels.use_backend("python"):
        assert kernels.BACKEND == "python" and kernels.restrict4 is _kernels_py.restrict4
    assert kernels.BACKEND == before


def test_env_override(monkeypatch):
    monkeypatch.setenv("PTYCHOMG_KERNELS", "python")
    assert kernels.get_backend() is _kernels_py


def _run_all(mod, rng):
    n = 16
    g = standard_scan(n)
    z = rand_field(rng, n)
    d = rng.random((9, n, n)) * 5
    d[0, 0, 0] = 0.0
    out = {}
    stack = np.empty((9, n, n), complex)
    mod.gather_windows(z, g.rows, g.cols, g.window_size, stack)
    out["gather"] = stack.copy()
    acc = np.empty((n, n), complex)
    mod.scatter_add_windows(stack, g.rows, g.cols, g.window_size, acc)
    out["scatter"] = acc
    spec = np.fft.fft2(stack)
    spec[0, 0, 0] = 0.0
    s1 = spec.copy()
    mod.modulus_project(s1, np.sqrt(d))
    out["project"] = s1
    s2 = spec.copy()
    out["dist_total"] = mod.distance_residual(s2, np.sqrt(d))
    out["dist"] = s2
    s3 = spec.copy()
    out["int_total"] = mod.intensity_residual(s3, d)
    out["int"] = s3
    half = np.empty((n // 2, n // 2), complex)
    mod.restrict4(z, half)
    out["restrict"] = half
    up = np.empty((n, n), complex)
    mod.prolong2(half, up)
    out["prolong"] = up
    return out


@compiled
def test_backends_agree(rng):
    seed = rng.integers(2**32)
    a = _run_all(kernels.get_backend("cython"), np.random.default_rng(seed))
    b = _run_all(kernels.get_backend("python"), np.random.default_rng(seed))
    for key in ("gather", "scatter", "restrict", "prolong"):
        assert a[key].tobytes() == b[key].tobytes(), key
    for key in ("project", "dist", "int"):
        np.testing.assert_allclose(a[key], b[key], rtol=1e-13, atol=1e-12, err_msg=key)
    for key in ("dist_total", "int_total"):
        assert a[key] == pytest.approx(b[key], rel=1e-13)
    # zero spectral entry gets phase 0
    assert a["project"][0, 0, 0] == b["project"][0, 0, 0]


@compiled
@pytest.mark.parametrize("kind", [DISTANCE, INTENSITY])
def test_objective_backends_agree(rng, kind):
    g = standard_scan(32)
    data = simulate(rand_field(rng, 32), g)
    z = rand_field(rng, 32)
    obj = Objective(kind, g, data)
    with kernels.use_backend("cython"):
        a = obj(z)
    with kernels.use_backend("python"):
        b = obj(z)
    assert a.value == pytest.approx(b.value, rel=1e-12)
    np.testing.assert_allclose(a.gradient, b.gradient, rtol=1e-10, atol=1e-10 * np.abs(b.gradient).max())


def test_kernels_are_deterministic(rng, backend):
    seed = rng.integers(2**32)
    a = _run_all(kernels, np.random.default_rng(seed))
    b = _run_all(kernels, np.random.default_rng(seed))
    for key in a:
        assert np.asarray(a[key]).tobytes() == np.asarray(b[key]).tobytes()
