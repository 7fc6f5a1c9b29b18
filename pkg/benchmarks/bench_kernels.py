"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--n 128] [--repeat 20]

Times each kernel on a standard 9-probe scan plus one full distance and
intensity objective evaluation, and checks that both backends agree.
"""

import argparse
import timeit

import numpy as np

from ptychomg import kernels
from ptychomg.field import fft2, standard_scan
from ptychomg.forward import exit_waves, simulate
from ptychomg.objectives import DISTANCE, INTENSITY, Objective


def cases(n, rng):
    g = standard_scan(n)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    d = simulate(rng.standard_normal((n, n)) + 0j, g)
    sqrt_d = np.sqrt(d.patterns)
    spec = np.ascontiguousarray(fft2(exit_waves(z, g)))
    stack = np.empty((g.num_probes, n, n), dtype=np.complex128)
    out = np.empty((n, n), dtype=np.complex128)
    half = np.empty((n // 2, n // 2), dtype=np.complex128)
    dist, inten = Objective(DISTANCE, g, d), Objective(INTENSITY, g, d)
    w = g.window_size
    return {
        "gather_windows": lambda: kernels.gather_windows(z, g.rows, g.cols, w, stack),
        "scatter_add_windows": lambda: kernels.scatter_add_windows(spec, g.rows, g.cols, w, out),
        "modulus_project": lambda: kernels.modulus_project(spec.copy(), sqrt_d),
        "distance_residual": lambda: kernels.distance_residual(spec.copy(), sqrt_d),
        "intensity_residual": lambda: kernels.intensity_residual(spec.copy(), d.patterns),
        "restrict4": lambda: kernels.restrict4(z, half),
        "prolong2": lambda: kernels.prolong2(half, out),
        "phi_distance (full)": lambda: dist(z),
        "phi_intensity (full)": lambda: inten(z),
    }, (dist, inten, z)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the numpy fallback is available")
    timings = {}
    for name in backends:
        with kernels.use_backend(name):
            fns, (dist, inten, z) = cases(args.n, np.random.default_rng(0))
            timings[name] = {k: min(timeit.repeat(f, number=1, repeat=args.repeat)) for k, f in fns.items()}
            timings[name]["_values"] = (dist(z), inten(z))
    names = list(timings[backends[0]])[:-1]
    print(f"n={args.n}, best of {args.repeat}, milliseconds")
    print(f"{'kernel':<24}" + "".join(f"{b:>10}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for k in names:
        row = f"{k:<24}" + "".join(f"{timings[b][k] * 1e3:>10.3f}" for b in backends)
        if len(backends) > 1:
            row += f"{timings['python'][k] / timings['cython'][k]:>9.1f}x"
        print(row)
    if len(backends) > 1:
        for label, a, b in zip(("distance", "intensity"), timings["cython"]["_values"],
                               timings["python"]["_values"]):
            dv = abs(a.value - b.value) / max(abs(b.value), 1e-300)
            dg = np.linalg.norm(a.gradient - b.gradient) / np.linalg.norm(b.gradient)
            print(f"backend agreement ({label}): value {dv:.1e}, gradient {dg:.1e}")


if __name__ == "__main__":
    main()
