"""Grid transfers for objects, gradients and diffraction data, and the MG/OPT V-cycle."""

from dataclasses import dataclass, field
import numpy as np

from . import kernels
from .field import GeometryError, as_field, generate_raster_scan, real_inner
from .forward import DiffractionStack
from .objectives import DISTANCE, Objective
from .solvers import (BUDGET, MAX_ITERS, TOLERANCE, EvalCounter, LBFGSMemory, SolverConfig,
                      SolverReport, backtracking_linesearch, evaluate, lbfgs)

MIN_LEVEL_SIZE = 8


def restrict_field(fine):
    """Four-point average onto the cell-centred grid of half the size."""
    fine = as_field(fine)
    n = fine.shape[0]
    if n % 2:
        raise GeometryError(f"cannot restrict a grid of odd size {n}")
    out = np.empty((n // 2, n // 2), dtype=np.complex128)
    kernels.restrict4(fine, out)
    return out


def prolong_field(coarse):
    """``4 * restriction^T``: piecewise-constant injection onto the doubled grid."""
    coarse = as_field(coarse)
    m = coarse.shape[0]
    out = np.empty((2 * m, 2 * m), dtype=np.complex128)
    kernels.prolong2(coarse, out)
    return out


def crop_low_frequencies(pattern):
    """Central ``n/2 x n/2`` block of the frequency-centred pattern, uncentred again."""
    n = pattern.shape[-1]
    if n % 2:
        raise GeometryError(f"cannot restrict data of odd size {n}")
    m = n // 2
    lo = n // 2 - m // 2
    centred = np.fft.fftshift(pattern, axes=(-2, -1))
    block = centred[..., lo:lo + m, lo:lo + m]
    return np.fft.ifftshift(block, axes=(-2, -1))


DATA_SCALE = 1.0 / 16.0


def restrict_data(fine):
    """Low-pass restriction of every pattern, scaled by ``(n_H / n_h)**4 = 1/16``.

    The scale keeps coarse intensities consistent with simulating the
    four-point-averaged object under the unnormalized DFT.
    """
    return DiffractionStack(np.ascontiguousarray(crop_low_frequencies(fine.patterns) * DATA_SCALE))


@dataclass
class GridLevel:
    n: int
    geometry: object
    data: DiffractionStack
    objective_kind: str = DISTANCE
    smoother: SolverConfig = field(default_factory=SolverConfig)
    level_index: int = 0

    @property
    def objective(self):
        return Objective(self.objective_kind, self.geometry, self.data, level=self.level_index)


def build_coarse_level(fine, smoother=None):
    if fine.n < 2 * MIN_LEVEL_SIZE:
        raise GeometryError(f"grid n={fine.n} is too small to coarsen (coarse would be < {MIN_LEVEL_SIZE})")
    g = fine.geometry
    if g.window_size % 2 or g.stride % 2:
        raise GeometryError("window and stride must be even to halve the scan")
    n = fine.n // 2
    geometry = generate_raster_scan(n, g.window_size // 2, g.stride // 2)
    return GridLevel(n, geometry, restrict_data(fine.data), fine.objective_kind,
                     smoother if smoother is not None else fine.smoother, fine.level_index + 1)


@dataclass
class Hierarchy:
    levels: list
    k1: int = 1
    k2: int = 1
    coarsest_max_iters: int = 3
    coarse_tol: float = 1e-4
    smooth_tol: float = 1e-3
    lbfgs_memory: int = 25
    linesearch_max: int = 50
    # keep LBFGS curvature pairs per level across cycles
    persistent_memory: bool = True
    correction_pairs: bool = True
    # "start": tolerances relative to each solve's starting gradient;
    # "first": relative to the gradient at the level's first visit in a run
    tol_reference: str = "start"

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0 or self.k1 + self.k2 <= 0:
            raise ValueError("need nonnegative k1, k2 with k1 + k2 > 0")
        for a, b in zip(self.levels, self.levels[1:]):
            if b.n * 2 != a.n:
                raise ValueError("grid sizes must halve between consecutive levels")
        self._objectives = [lvl.objective for lvl in self.levels]
        self.reset_memory()

    def reset_memory(self):
        self._memories = [LBFGSMemory(self.lbfgs_memory) for _ in self.levels]
        self._grad_refs = [None] * len(self.levels)

    def grad_ref(self, level, ev):
        if self.tol_reference != "first":
            return None
        if self._grad_refs[level] is None:
            self._grad_refs[level] = float(np.linalg.norm(ev.gradient))
        return self._grad_refs[level]

    def memory(self, level):
        return self._memories[level] if self.persistent_memory else None

    @property
    def depth(self):
        return len(self.levels)

    @property
    def coarsest(self):
        return self.depth - 1

    def objective(self, level):
        return self._objectives[level]

    def smoother_config(self, iters):
        return SolverConfig(max_iters=iters, grad_tol_rel=self.smooth_tol,
                            lbfgs_memory=self.lbfgs_memory, linesearch_max=self.linesearch_max)

    def coarse_config(self):
        return SolverConfig(max_iters=self.coarsest_max_iters, grad_tol_rel=self.coarse_tol,
                            lbfgs_memory=self.lbfgs_memory, linesearch_max=self.linesearch_max)


def build_hierarchy(geometry, data, depth, kind=DISTANCE, **params):
    """Fine level from ``geometry``/``data`` plus ``depth - 1`` coarsenings."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    levels = [GridLevel(geometry.n, geometry, data, kind, level_index=0)]
    for _ in range(depth - 1):
        levels.append(build_coarse_level(levels[-1]))
    return Hierarchy(levels, **params)


def coarse_shift(hier, level, z_bar, v, grad_fine_shifted, counter):
    """Restricted point and the first-order-matching shift on level ``level + 1``.

    ``grad_fine_shifted`` is the gradient of the ``v``-shifted fine objective
    at ``z_bar``; returns ``(z_H, v_bar, coarse evaluation of the unshifted
    objective at z_H)``.
    """
    coarse_obj = hier.objective(level + 1)
    z_H = restrict_field(z_bar)
    ev_H = evaluate(coarse_obj, z_H, counter)
    # v_bar = R v + grad Phi_H(z_H) - R grad Phi_h(z_bar) = grad Phi_H(z_H) - R(grad Phi_h - v)
    v_bar = ev_H.gradient - restrict_field(grad_fine_shifted)
    return z_H, v_bar, ev_H


def _cycle(hier, level, z, v, counter, current=None, trace=None):
    obj = hier.objective(level).shifted(v)
    ev = current if current is not None else evaluate(obj, z, counter)
    ref = hier.grad_ref(level, ev)
    if level == hier.coarsest:
        rep = lbfgs(obj, z, hier.coarse_config(), counter, initial=ev,
                    memory=hier.memory(level), grad_ref=ref)
        return rep.final_iterate, rep.final_eval
    if hier.k1 > 0:
        rep = lbfgs(obj, z, hier.smoother_config(hier.k1), counter, initial=ev,
                    memory=hier.memory(level), grad_ref=ref)
        z, ev = rep.final_iterate, rep.final_eval
    z_H, v_bar, ev_H = coarse_shift(hier, level, z, v, ev.gradient, counter)
    # shifted coarse evaluation at z_H, reusing the unshifted one
    coarse_ev = type(ev_H)(ev_H.value - real_inner(v_bar, z_H), ev_H.gradient - v_bar)
    z_H_plus, _ = _cycle(hier, level + 1, z_H, v_bar, counter, coarse_ev, trace)
    e_h = prolong_field(z_H_plus - z_H)
    ls = backtracking_linesearch(obj, z, e_h, counter, ev, hier.linesearch_max)
    if trace is not None:
        trace.append({"level": level, "alpha": ls.alpha, "trials": ls.trials,
                      "before": ev.value, "after": ls.evaluation.value})
    mem = hier.memory(level)
    if mem is not None and hier.correction_pairs and ls.alpha > 0 and ls.trials > 0:
        mem.update(ls.z - z, ls.evaluation.gradient - ev.gradient)
    z, ev = ls.z, ls.evaluation
    if hier.k2 > 0:
        rep = lbfgs(obj, z, hier.smoother_config(hier.k2), counter, initial=ev,
                    memory=hier.memory(level), grad_ref=ref)
        z, ev = rep.final_iterate, rep.final_eval
    return z, ev


def mgopt_cycle(hier, level, z, v, counter, current=None, trace=None):
    """One MG/OPT V-cycle from ``level`` down to the coarsest grid and back.

    ``current`` optionally holds the ``v``-shifted evaluation at ``z``.
    Returns the new iterate; see :func:`mgopt_cycle_eval` for the evaluation too.
    """
    return _cycle(hier, level, as_field(z), v, counter, current, trace)[0]


def mgopt_cycle_eval(hier, level, z, v, counter, current=None, trace=None):
    return _cycle(hier, level, as_field(z), v, counter, current, trace)


def mgopt_driver(hier, z0, budget, counter=None, grad_tol_rel=0.0, max_cycles=10_000,
                 callback=None, trace=None, initial=None):
    """Repeat fine-level V-cycles (with zero shift) until budget or tolerance.

    A depth-1 hierarchy runs plain LBFGS on the fine objective under the same
    budget and tolerance. ``callback(cycle, z, evaluation)`` runs after each
    cycle. ``report.history`` has one row per cycle (the first row is the
    starting point). ``initial`` may hold the evaluation at ``z0``.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    if counter is None:
        counter = EvalCounter(hier.levels[0].n)
    obj = hier.objective(0)
    if hier.depth == 1:
        cfg = SolverConfig(max_iters=max_cycles, grad_tol_rel=grad_tol_rel,
                           lbfgs_memory=hier.lbfgs_memory,
                           linesearch_max=hier.linesearch_max, budget=budget)
        cb = None if callback is None else _iteration_callback(callback)
        return lbfgs(obj, z0, cfg, counter, initial=initial, callback=cb)

    hier.reset_memory()
    z = as_field(z0)
    ev = initial if initial is not None else evaluate(obj, z, counter)
    report = SolverReport(z, ev)
    report.history.append((counter.weighted_evals, ev.value, float(np.linalg.norm(ev.gradient))))
    g0 = np.linalg.norm(ev.gradient)
    reason = MAX_ITERS
    cycles = 0
    if g0 == 0 or not np.isfinite(g0):
        reason = TOLERANCE
    while reason == MAX_ITERS and cycles < max_cycles:
        if counter.exhausted(budget):
            reason = BUDGET
            break
        z, ev = _cycle(hier, 0, z, None, counter, ev, trace)
        cycles += 1
        report.history.append((counter.weighted_evals, ev.value, float(np.linalg.norm(ev.gradient))))
        if callback is not None:
            callback(cycles, z, ev)
        if np.linalg.norm(ev.gradient) <= grad_tol_rel * g0:
            reason = TOLERANCE
    report.final_iterate, report.final_eval = z, ev
    report.termination_reason, report.iterations = reason, cycles
    return report


def _iteration_callback(callback):
    state = {"i": 0}

    def cb(z, ev):
        state["i"] += 1
        callback(state["i"], z, ev)

    return cb
