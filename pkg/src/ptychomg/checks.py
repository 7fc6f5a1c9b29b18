"""Self-checks of the grid-transfer operators, run by ``ptychomg hierarchy-check``."""

from dataclasses import dataclass

import numpy as np

from .field import generate_raster_scan, real_inner, standard_scan
from .forward import DiffractionStack, simulate
from .multigrid import (DATA_SCALE, build_hierarchy, coarse_shift, prolong_field,
                        restrict_data, restrict_field)
from .objectives import DISTANCE, Objective


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rand(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def check_adjointness(n, pairs, rng, tol=1e-12):
    worst = 0.0
    for _ in range(pairs):
        u, w = _rand(rng, n // 2), _rand(rng, n)
        lhs = real_inner(prolong_field(u), w)
        rhs = 4.0 * real_inner(u, restrict_field(w))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return CheckResult("prolong = 4 restrict^T", bool(worst <= tol),
                       f"max rel err {worst:.2e} over {pairs} pairs")


def check_restrict_prolong(n, rng):
    u = _rand(rng, n // 2)
    ok = np.array_equal(restrict_field(prolong_field(u)), u)
    return CheckResult("restrict(prolong(u)) == u", ok, "exact" if ok else "mismatch")


def check_dc_calibration(n, tol=1e-10):
    c = 0.7 - 0.2j
    full = generate_raster_scan(n, n, 1)
    fine = simulate(np.full((n, n), c), full)
    coarse_sim = simulate(restrict_field(np.full((n, n), c)), generate_raster_scan(n // 2, n // 2, 1))
    restricted = restrict_data(fine)
    err = abs(restricted.patterns[0, 0, 0] - coarse_sim.patterns[0, 0, 0]) / coarse_sim.patterns[0, 0, 0]
    return CheckResult(f"data restriction DC scale {DATA_SCALE:g}", bool(err <= tol), f"rel err {err:.2e}")


def check_marker_crop(n):
    # each centred frequency index gets a unique value
    marker = np.arange(n * n, dtype=np.float64).reshape(n, n)
    pattern = np.fft.ifftshift(marker)
    got = np.fft.fftshift(restrict_data(DiffractionStack(pattern[None])).patterns[0])
    m = n // 2
    lo = n // 2 - m // 2
    expected = marker[lo:lo + m, lo:lo + m] * DATA_SCALE
    ok = np.array_equal(got, expected)
    return CheckResult("low-pass crop of centred marker", ok, "exact" if ok else "mismatch")


def check_coherence(n, rng, tol=1e-12):
    geometry = standard_scan(n)
    data = simulate(_rand(rng, n), geometry)
    hier = build_hierarchy(geometry, data, 2, kind=DISTANCE)
    z, v = _rand(rng, n), 0.1 * _rand(rng, n)
    fine = Objective(DISTANCE, geometry, data).shifted(v)(z)
    z_H, v_bar, _ = coarse_shift(hier, 0, z, v, fine.gradient, None)
    coarse = hier.objective(1).shifted(v_bar)(z_H)
    target = restrict_field(fine.gradient)
    err = np.linalg.norm(coarse.gradient - target) / np.linalg.norm(target)
    return CheckResult("first-order coherence of the shift", bool(err <= tol), f"rel err {err:.2e}")


def check_geometry(n, depth):
    geometry = standard_scan(n)
    data = DiffractionStack(np.zeros((geometry.num_probes, n, n)))
    hier = build_hierarchy(geometry, data, depth)
    probes = {lvl.geometry.num_probes for lvl in hier.levels}
    overlaps = {lvl.geometry.overlap for lvl in hier.levels}
    ok = len(probes) == 1 and len(overlaps) == 1
    sizes = "->".join(str(lvl.n) for lvl in hier.levels)
    return CheckResult("probe count and overlap per level", ok,
                       f"{sizes}: probes {sorted(probes)}, overlap {sorted(overlaps)}")


def run_checks(n=64, pairs=100, seed=0):
    rng = np.random.default_rng(seed)
    depth = 1
    while (n >> depth) >= 8:
        depth += 1
    return [
        check_adjointness(n, pairs, rng),
        check_restrict_prolong(n, rng),
        check_dc_calibration(n),
        check_marker_crop(n),
        check_coherence(n if n <= 64 else 32, rng),
        check_geometry(n, depth),
    ]
