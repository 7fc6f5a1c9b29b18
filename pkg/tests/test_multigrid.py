import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptychomg.field import GeometryError, generate_raster_scan, real_inner, standard_scan
from ptychomg.forward import DiffractionStack, NoiseSpec, add_noise, simulate
from ptychomg.multigrid import (DATA_SCALE, GridLevel, Hierarchy, build_coarse_level, build_hierarchy,
                                coarse_shift, crop_low_frequencies, mgopt_cycle, mgopt_cycle_eval,
                                mgopt_driver, prolong_field, restrict_data, restrict_field)
from ptychomg.objectives import DISTANCE, INTENSITY, Objective
from ptychomg.solvers import EvalCounter, SolverConfig, lbfgs

from conftest import rand_field


def test_restrict_examples(rng):
    np.testing.assert_array_equal(restrict_field(np.full((4, 4), 2 - 1j)), np.full((2, 2), 2 - 1j))
    assert restrict_field(np.array([[1, 3], [5, 7]]))[0, 0] == 4
    with pytest.raises(GeometryError):
        restrict_field(np.zeros((3, 3)))


def test_restrict_matches_reshape_mean(rng, backend):
    f = rand_field(rng, 16)
    np.testing.assert_allclose(restrict_field(f), f.reshape(8, 2, 8, 2).mean(axis=(1, 3)), atol=1e-15)


def test_prolong_examples(rng, backend):
    np.testing.assert_array_equal(prolong_field(np.array([[3 + 1j]])), np.full((2, 2), 3 + 1j))
    u = rand_field(rng, 8)
    np.testing.assert_array_equal(prolong_field(u), np.kron(u, np.ones((2, 2))))
    np.testing.assert_array_equal(restrict_field(prolong_field(u)), u)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 8, 32]))
def test_transfer_adjointness(seed, m):
    rng = np.random.default_rng(seed)
    u, w = rand_field(rng, m), rand_field(rng, 2 * m)
    lhs = real_inner(prolong_field(u), w)
    rhs = 4 * real_inner(u, restrict_field(w))
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_restrict_linearity(rng):
    a, b = rand_field(rng, 8), rand_field(rng, 8)
    lhs = restrict_field(2.5 * a - 1j * b)
    np.testing.assert_allclose(lhs, 2.5 * restrict_field(a) - 1j * restrict_field(b), atol=1e-14)


def test_marker_crop_even_convention():
    n = 8
    marker = np.arange(n * n, dtype=float).reshape(n, n)
    out = np.fft.fftshift(restrict_data(DiffractionStack(np.fft.ifftshift(marker)[None])).patterns[0])
    np.testing.assert_array_equal(out, marker[2:6, 2:6] * DATA_SCALE)
    # zero frequency stays at index 0 of the uncentred block
    pattern = np.zeros((n, n))
    pattern[0, 0] = 16.0
    assert crop_low_frequencies(pattern)[0, 0] == 16.0


def test_data_restriction_constant_object():
    n, c = 32, 0.6 + 0.3j
    fine = simulate(np.full((n, n), c), generate_raster_scan(n, n, 1))
    assert fine.patterns[0, 0, 0] == pytest.approx((n * n * abs(c)) ** 2)
    coarse = simulate(np.full((n // 2, n // 2), c), generate_raster_scan(n // 2, n // 2, 1))
    assert abs(restrict_data(fine).patterns[0, 0, 0] - coarse.patterns[0, 0, 0]) <= 1e-10 * coarse.patterns[0, 0, 0]


def test_restrict_zero_stack():
    assert not np.any(restrict_data(DiffractionStack(np.zeros((9, 16, 16)))).patterns)
    with pytest.raises(GeometryError):
        restrict_data(DiffractionStack(np.zeros((1, 5, 5))))


def test_coarse_level_geometry():
    g = standard_scan(512)
    data = DiffractionStack(np.zeros((9, 2, 2)))
    fine = GridLevel.__new__(GridLevel)
    fine.__dict__.update(n=512, geometry=g, data=DiffractionStack(np.zeros((9, 512, 512))),
                         objective_kind=INTENSITY, smoother=SolverConfig(), level_index=0)
    coarse = build_coarse_level(fine)
    assert (coarse.n, coarse.geometry.window_size, coarse.geometry.stride) == (256, 128, 64)
    assert coarse.geometry.num_probes == 9 and coarse.objective_kind == INTENSITY
    assert coarse.data.n == 256 and coarse.level_index == 1
    del data


def test_five_level_chain():
    n = 128
    g = standard_scan(n)
    hier = build_hierarchy(g, DiffractionStack(np.zeros((9, n, n))), 5)
    assert [lvl.n for lvl in hier.levels] == [128, 64, 32, 16, 8]
    assert all(lvl.geometry.num_probes == 9 and lvl.geometry.overlap == 0.5 for lvl in hier.levels)
    with pytest.raises(GeometryError):
        build_hierarchy(g, DiffractionStack(np.zeros((9, n, n))), 6)


def test_hierarchy_validation():
    g = standard_scan(32)
    data = DiffractionStack(np.zeros((9, 32, 32)))
    with pytest.raises(ValueError):
        build_hierarchy(g, data, 2, k1=0, k2=0)
    with pytest.raises(ValueError):
        build_hierarchy(g, data, 0)


def test_first_order_coherence(rng):
    n = 32
    g = standard_scan(n)
    data = simulate(rand_field(rng, n), g)
    hier = build_hierarchy(g, data, 2)
    for _ in range(5):
        z, v = rand_field(rng, n), rand_field(rng, n)
        fine = Objective(DISTANCE, g, data).shifted(v)(z)
        z_H, v_bar, _ = coarse_shift(hier, 0, z, v, fine.gradient, None)
        # v_bar = R v + grad Phi_H(z_H) - R grad Phi_h(z)
        unshifted = Objective(DISTANCE, g, data)(z)
        alt = restrict_field(v) + hier.objective(1)(z_H).gradient - restrict_field(unshifted.gradient)
        np.testing.assert_allclose(v_bar, alt, atol=1e-12)
        coarse = hier.objective(1).shifted(v_bar)(z_H)
        target = restrict_field(fine.gradient)
        assert np.linalg.norm(coarse.gradient - target) <= 1e-12 * np.linalg.norm(target)


def _noisy_problem(n, level, seed=0):
    rng = np.random.default_rng(seed)
    g = standard_scan(n)
    truth = np.abs(rand_field(rng, n)) * np.exp(1j * rng.random((n, n)))
    return g, add_noise(simulate(truth, g), NoiseSpec(level, seed)), rng


def test_cycle_does_not_increase(rng):
    g, data, rng = _noisy_problem(32, 0.05)
    hier = build_hierarchy(g, data, 2)
    obj = hier.objective(0)
    z = rng.random((32, 32)) + 1j * rng.random((32, 32))
    for _ in range(5):
        before = obj(z).value
        z = mgopt_cycle(hier, 0, z, None, EvalCounter(32))
        assert obj(z).value <= before


def test_zero_correction_when_coarse_is_optimal(rng):
    # on a constant consistent object every level is already at its minimum
    n = 32
    g = standard_scan(n)
    truth = np.ones((n, n), complex)
    hier = build_hierarchy(g, simulate(truth, g), 2)
    trace = []
    z, ev = mgopt_cycle_eval(hier, 0, truth, None, EvalCounter(n), trace=trace)
    np.testing.assert_allclose(z, truth, atol=1e-12)
    assert trace[0]["alpha"] == 1.0


def test_depth_one_equals_lbfgs(rng):
    g, data, rng = _noisy_problem(32, 0.0)
    z0 = rng.random((32, 32)) + 1j * rng.random((32, 32))
    hier = build_hierarchy(g, data, 1)
    a = mgopt_driver(hier, z0, 20.0, EvalCounter(32))
    cfg = SolverConfig(max_iters=10_000, budget=20.0)
    b = lbfgs(Objective(DISTANCE, g, data), z0, cfg, EvalCounter(32))
    assert a.history == b.history
    assert a.final_iterate.tobytes() == b.final_iterate.tobytes()


def test_driver_at_truth():
    n = 32
    g = standard_scan(n)
    truth = np.ones((n, n), complex)
    rep = mgopt_driver(build_hierarchy(g, simulate(truth, g), 2), truth, 100, EvalCounter(n))
    assert rep.termination_reason == "tolerance" and rep.iterations == 0
    assert not np.any(rep.final_eval.gradient)


def test_driver_budget_and_history(rng):
    g, data, rng = _noisy_problem(32, 0.0)
    z0 = rng.random((32, 32)) + 1j * rng.random((32, 32))
    hier = build_hierarchy(g, data, 3, coarsest_max_iters=5)
    c = EvalCounter(32)
    rep = mgopt_driver(hier, z0, 30, c)
    assert rep.termination_reason == "budget" and c.weighted_evals >= 30
    w = [h[0] for h in rep.history]
    values = [h[1] for h in rep.history]
    assert all(b > a for a, b in zip(w, w[1:]))
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert set(c.per_level) == {0, 1, 2} and c.sizes == {0: 32, 1: 16, 2: 8}
    with pytest.raises(ValueError):
        mgopt_driver(hier, z0, 0)


def test_intensity_hierarchy_runs(rng):
    g, data, rng = _noisy_problem(32, 0.0)
    hier = build_hierarchy(g, data, 2, kind=INTENSITY)
    z0 = rng.random((32, 32)) + 1j * rng.random((32, 32))
    rep = mgopt_driver(hier, z0, 10, EvalCounter(32))
    assert rep.history[-1][1] <= rep.history[0][1]


def test_hierarchy_memory_modes(rng):
    g, data, rng = _noisy_problem(32, 0.0)
    z0 = rng.random((32, 32)) + 1j * rng.random((32, 32))
    for kwargs in ({"persistent_memory": False}, {"correction_pairs": False}, {"tol_reference": "first"}):
        rep = mgopt_driver(build_hierarchy(g, data, 2, **kwargs), z0, 15, EvalCounter(32))
        values = [h[1] for h in rep.history]
        assert all(b <= a for a, b in zip(values, values[1:]))
    assert isinstance(build_hierarchy(g, data, 2), Hierarchy)
