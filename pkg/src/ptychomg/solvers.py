"""Linesearch, LBFGS, truncated Newton and PIE with weighted evaluation counting.

All solvers work on complex fields with the real inner product of the
stacked (real, imaginary) parts. One call of an :class:`~ptychomg.objectives.Objective`
(value and gradient together) is one evaluation; an evaluation on a grid of
side ``n_l`` costs ``(n_l / n_fine)**2`` fine-grid evaluations.
"""

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .field import apply_probe, as_field, real_inner
from .objectives import DISTANCE, Objective, ObjectiveEval, project_modulus

TOLERANCE = "tolerance"
BUDGET = "budget"
MAX_ITERS = "maxIters"
STALL = "stall"


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 100
    grad_tol_rel: float = 0.0
    lbfgs_memory: int = 25
    linesearch_max: int = 50
    pie_gamma: float = 0.0
    # stop once the counter's weighted total reaches this value
    budget: Optional[float] = None

    def __post_init__(self):
        if self.max_iters < 0 or self.lbfgs_memory < 1 or self.linesearch_max < 1:
            raise ValueError(f"invalid solver configuration {self}")
        if self.pie_gamma < 0:
            raise ValueError("PIE relaxation must be nonnegative")

    def with_(self, **changes):
        return replace(self, **changes)


class EvalCounter:
    """Counts evaluations per grid level and their fine-grid-weighted total."""

    def __init__(self, n_fine):
        self.n_fine = n_fine
        self.per_level = {}
        self.sizes = {}

    def weight(self, n):
        return (n / self.n_fine) ** 2

    def add(self, level, n, count=1):
        self.per_level[level] = self.per_level.get(level, 0) + count
        self.sizes[level] = n

    @property
    def weighted_evals(self):
        return sum(c * self.weight(self.sizes[lvl]) for lvl, c in sorted(self.per_level.items()))

    def exhausted(self, budget):
        return budget is not None and self.weighted_evals >= budget


@dataclass
class SolverReport:
    final_iterate: np.ndarray
    final_eval: Optional[ObjectiveEval]
    # rows of (weighted evals, objective value, gradient norm)
    history: list = field(default_factory=list)
    termination_reason: str = MAX_ITERS
    iterations: int = 0
    extra: dict = field(default_factory=dict)


def evaluate(obj, z, counter):
    """Evaluate ``obj`` at ``z`` and charge one evaluation to ``counter``."""
    out = obj(z)
    if counter is not None:
        counter.add(obj.level, obj.n)
    return out


@dataclass
class LinesearchResult:
    alpha: float
    z: np.ndarray
    evaluation: ObjectiveEval
    trials: int


def backtracking_linesearch(obj, z, e, counter, current=None, max_trials=50):
    """Halve ``alpha`` from 1 until ``Phi(z + alpha e) <= Phi(z)``.

    Tries at most ``max_trials`` step lengths. If none is accepted the result
    has ``alpha == 0`` and ``z`` unchanged. An exactly zero direction is
    accepted at ``alpha = 1`` without evaluating.
    """
    if current is None:
        current = evaluate(obj, z, counter)
    if not np.any(e):
        return LinesearchResult(1.0, z, current, 0)
    alpha = 1.0
    for trial in range(1, max_trials + 1):
        z_new = z + alpha * e
        ev = evaluate(obj, z_new, counter)
        if ev.value <= current.value:
            return LinesearchResult(alpha, z_new, ev, trial)
        alpha *= 0.5
    return LinesearchResult(0.0, z, current, max_trials)


def _record(report, counter, ev):
    w = counter.weighted_evals if counter is not None else float(len(report.history))
    report.history.append((w, ev.value, float(np.linalg.norm(ev.gradient))))


class LBFGSMemory:
    """Curvature pairs ``(s, y, 1/s.y)``; pairs with ``s.y <= 1e-12 |s||y|`` are skipped."""

    def __init__(self, size):
        self.pairs = deque(maxlen=size)

    def update(self, s, y):
        sy = real_inner(s, y)
        if sy <= 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        self.pairs.append((s, y, 1.0 / sy))
        return True

    def direction(self, g):
        """Two-loop recursion: ``-H g``."""
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * real_inner(s, q)
            q -= a * y
            alphas.append(a)
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= real_inner(s, y) / real_inner(y, y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * real_inner(y, q)
            q += (a - b) * s
        return -q


def lbfgs(obj, z0, cfg, counter, initial=None, callback=None, memory=None, grad_ref=None):
    """Limited-memory BFGS with a plain-decrease backtracking linesearch.

    ``initial`` may carry an already computed evaluation at ``z0`` so that it
    is not charged twice. ``callback(z, evaluation)`` runs after every
    accepted step. Passing a :class:`LBFGSMemory` as ``memory`` warm-starts
    the curvature pairs and lets the caller keep them after the run.
    The relative gradient tolerance is measured against ``grad_ref`` when
    given, else against the gradient norm at ``z0``.
    """
    z = as_field(z0)
    ev = initial if initial is not None else evaluate(obj, z, counter)
    report = SolverReport(z, ev)
    _record(report, counter, ev)
    g0 = np.linalg.norm(ev.gradient)
    ref = g0 if grad_ref is None else grad_ref
    if memory is None:
        memory = LBFGSMemory(cfg.lbfgs_memory)
    reason = MAX_ITERS
    it = 0
    if g0 == 0 or not np.isfinite(g0) or (grad_ref is not None and g0 <= cfg.grad_tol_rel * ref):
        reason = TOLERANCE
    else:
        while it < cfg.max_iters:
            if counter is not None and counter.exhausted(cfg.budget):
                reason = BUDGET
                break
            d = memory.direction(ev.gradient)
            if real_inner(d, ev.gradient) >= 0:
                d = -ev.gradient
            ls = backtracking_linesearch(obj, z, d, counter, ev, cfg.linesearch_max)
            if ls.alpha == 0.0:
                reason = STALL
                break
            memory.update(ls.z - z, ls.evaluation.gradient - ev.gradient)
            z, ev = ls.z, ls.evaluation
            it += 1
            _record(report, counter, ev)
            if callback is not None:
                callback(z, ev)
            if np.linalg.norm(ev.gradient) <= cfg.grad_tol_rel * ref:
                reason = TOLERANCE
                break
    report.final_iterate, report.final_eval = z, ev
    report.termination_reason, report.iterations = reason, it
    return report


def hessian_vector_product(obj, z, v, g=None, counter=None):
    """Forward-difference approximation of ``H v`` from two gradients.

    Uses ``delta = 1e-6 (1 + ||z||) / ||v||``. Charges one evaluation, plus one
    more when ``g`` (the gradient at ``z``) is not supplied.
    """
    if g is None:
        g = evaluate(obj, z, counter).gradient
    vn = np.linalg.norm(v)
    if vn == 0:
        return np.zeros_like(v)
    delta = 1e-6 * (1.0 + np.linalg.norm(z)) / vn
    g_plus = evaluate(obj, z + delta * v, counter).gradient
    return (g_plus - g) / delta


def _newton_direction(obj, z, g, counter, max_cg=20, rel_tol=0.1):
    # CG on H p = -g; returns (p, cg iterations)
    p = np.zeros_like(g)
    r = -g
    d = r.copy()
    rr = real_inner(r, r)
    stop = rel_tol * np.sqrt(rr)
    it = 0
    while it < max_cg:
        hd = hessian_vector_product(obj, z, d, g, counter)
        it += 1
        curv = real_inner(d, hd)
        if curv <= 0:
            if not np.any(p):
                p = -g
            break
        a = rr / curv
        p = p + a * d
        r = r - a * hd
        rr_new = real_inner(r, r)
        if np.sqrt(rr_new) <= stop:
            break
        d = r + (rr_new / rr) * d
        rr = rr_new
    return p, it


def truncated_newton(obj, z0, cfg, counter, max_cg=20, cg_rel_tol=0.1, callback=None, initial=None):
    """Newton-CG with finite-difference Hessian actions.

    Each outer iteration uses the gradient at the iterate plus one gradient
    per inner CG iteration; ``report.extra["grad_evals"]`` lists ``1 + cg``
    per outer iteration and ``report.extra["linesearch_evals"]`` the trial
    evaluations of each linesearch. ``initial`` works as in :func:`lbfgs`.
    """
    z = as_field(z0)
    ev = initial if initial is not None else evaluate(obj, z, counter)
    report = SolverReport(z, ev)
    report.extra["grad_evals"] = []
    report.extra["linesearch_evals"] = []
    _record(report, counter, ev)
    g0 = np.linalg.norm(ev.gradient)
    reason = MAX_ITERS
    it = 0
    if g0 == 0 or not np.isfinite(g0):
        reason = TOLERANCE
    else:
        while it < cfg.max_iters:
            if counter is not None and counter.exhausted(cfg.budget):
                reason = BUDGET
                break
            p, cg_its = _newton_direction(obj, z, ev.gradient, counter, max_cg, cg_rel_tol)
            if real_inner(p, ev.gradient) >= 0:
                p = -ev.gradient
            report.extra["grad_evals"].append(1 + cg_its)
            ls = backtracking_linesearch(obj, z, p, counter, ev, cfg.linesearch_max)
            report.extra["linesearch_evals"].append(ls.trials)
            if ls.alpha == 0.0:
                reason = STALL
                break
            z, ev = ls.z, ls.evaluation
            it += 1
            _record(report, counter, ev)
            if callback is not None:
                callback(z, ev)
            if np.linalg.norm(ev.gradient) <= cfg.grad_tol_rel * g0:
                reason = TOLERANCE
                break
    report.final_iterate, report.final_eval = z, ev
    report.termination_reason, report.iterations = reason, it
    return report


def pie_weight(probe, gamma):
    """Element-wise PIE step factor ``|q|/max|q| * conj(q) / (|q|^2 + gamma)``."""
    probe = np.asarray(probe)
    amp = np.abs(probe)
    top = amp.max()
    if top == 0:
        return np.zeros_like(probe, dtype=np.complex128)
    denom = amp ** 2 + gamma
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, (amp / top) * np.conj(probe) / safe, 0.0)


def pie_update(z, window, d_k, gamma=0.0):
    """One inner PIE update for a single probe."""
    z = as_field(z)
    correction = project_modulus(z, window, d_k) - apply_probe(z, window)
    rs, cs = window.slices
    weight = pie_weight(np.ones((window.width, window.width)), gamma)
    out = z.copy()
    out[rs, cs] += weight * correction[rs, cs]
    return out


def pie(z0, geometry, data, gamma, sweeps, counter=None, level=0,
        monitor: Optional[Callable] = None, budget=None):
    """Sequential projections over the probes in scan order.

    A full sweep is charged as one evaluation on the object's grid.
    ``monitor(z)`` may return an :class:`ObjectiveEval` used only for the
    history; its cost is not charged.
    """
    if gamma < 0:
        raise ValueError("PIE relaxation must be nonnegative")
    z = as_field(z0).copy()
    patterns = data.patterns
    report = SolverReport(z, None)

    def log():
        if monitor is None:
            return
        ev = monitor(z)
        report.final_eval = ev
        w = counter.weighted_evals if counter is not None else float(len(report.history))
        report.history.append((w, ev.value, float(np.linalg.norm(ev.gradient))))

    log()
    reason = MAX_ITERS
    done = 0
    for _ in range(sweeps):
        if counter is not None and counter.exhausted(budget):
            reason = BUDGET
            break
        for k, window in enumerate(geometry.windows):
            z = pie_update(z, window, patterns[k], gamma)
        done += 1
        if counter is not None:
            counter.add(level, geometry.n)
        log()
    report.final_iterate = z
    report.termination_reason, report.iterations = reason, done
    return report


def pie_monitor(geometry, data):
    """Uncharged distance-objective evaluator for PIE histories."""
    obj = Objective(DISTANCE, geometry, data)
    return obj.evaluate
