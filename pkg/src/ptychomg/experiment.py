"""Experiment orchestration: data generation, solver runs, logging and outputs."""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .field import standard_scan
from .forward import NoiseSpec, add_noise, build_ground_truth, simulate
from .metrics import (MetricError, convergence_factor, magnitude_rel_error, phase_image,
                      phase_ssim, relative_error)
from .multigrid import MIN_LEVEL_SIZE, build_hierarchy, mgopt_driver
from .objectives import DISTANCE, KINDS, Objective
from .solvers import (EvalCounter, SolverConfig, evaluate, lbfgs, pie, pie_monitor,
                      truncated_newton)

SOLVERS = ("pie", "lbfgs", "tn", "mgopt")
DATA_DIR = Path(__file__).parent / "data"


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    n: int = 64
    magnitude_image: Optional[str] = None
    phase_image: Optional[str] = None
    noise_levels: list = field(default_factory=lambda: [0.0])
    solver: str = "mgopt"
    mgopt_depth: int = 2
    budget: float = 100.0
    seed: int = 0
    output_dir: Optional[str] = None
    objective: str = DISTANCE
    gamma: float = 0.0
    lbfgs_memory: int = 25
    linesearch_max: int = 50
    grad_tol_rel: float = 0.0
    k1: int = 1
    k2: int = 1
    # None picks 3 for two levels and 100 for deeper hierarchies
    coarsest_max_iters: Optional[int] = None
    coarse_tol: float = 1e-4
    smooth_tol: float = 1e-3
    # "random" (uniform real and imaginary parts in [0, 1]) or "truth"
    initial: str = "random"
    initial_perturbation: float = 0.0
    # reconstruct from a stored diffraction stack instead of simulating
    data_path: Optional[str] = None

    def validate(self):
        n = self.n
        if n < 1 or n & (n - 1):
            raise ConfigError(f"n must be a power of two, got {n}")
        if n < 4:
            raise ConfigError("n must be at least 4 for the raster scan")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.objective not in KINDS:
            raise ConfigError(f"objective must be one of {KINDS}, got {self.objective!r}")
        if self.solver == "mgopt":
            if self.mgopt_depth < 1:
                raise ConfigError("mgopt_depth must be at least 1")
            coarsest = n >> (self.mgopt_depth - 1)
            if self.mgopt_depth > 1 and coarsest < MIN_LEVEL_SIZE:
                raise ConfigError(
                    f"depth {self.mgopt_depth} at n={n} gives a {coarsest}x{coarsest} coarsest grid "
                    f"(minimum {MIN_LEVEL_SIZE})")
            if self.k1 < 0 or self.k2 < 0 or self.k1 + self.k2 == 0:
                raise ConfigError("need k1, k2 >= 0 with k1 + k2 > 0")
        if not self.budget > 0:
            raise ConfigError("budget must be positive")
        if not self.noise_levels or any(not lvl >= 0 for lvl in self.noise_levels):
            raise ConfigError("noise levels must be a nonempty list of nonnegative fractions")
        if self.initial not in ("random", "truth"):
            raise ConfigError(f"initial must be 'random' or 'truth', got {self.initial!r}")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative")
        return self

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        try:
            values = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(values)

    def to_dict(self):
        return asdict(self)

    def coarse_cap(self):
        if self.coarsest_max_iters is not None:
            return self.coarsest_max_iters
        return 3 if self.mgopt_depth == 2 else 100


@dataclass
class ConvergenceRecord:
    cycle: int
    weighted_evals: float
    phi: float
    rel_err: float
    mag_err: float
    phase_ssim: float
    conv_factor: float


@dataclass
class RunResult:
    noise_level: float
    solver: str
    records: list
    z: np.ndarray
    counter: EvalCounter
    termination_reason: str
    files: dict = field(default_factory=dict)


def bundled_image(kind, n):
    path = DATA_DIR / f"{kind}_{n}.pgm"
    if not path.exists():
        sizes = sorted(int(p.stem.split("_")[1]) for p in DATA_DIR.glob(f"{kind}_*.pgm"))
        raise ConfigError(f"no bundled {kind} image at n={n}; available sizes {sizes}")
    return path


def ground_truth(cfg):
    mag_path = cfg.magnitude_image or bundled_image("magnitude", cfg.n)
    phase_path = cfg.phase_image or bundled_image("phase", cfg.n)
    mag = io.load_image(mag_path, cfg.n)
    phase = io.load_image(phase_path, cfg.n)
    return build_ground_truth(mag, phase)


def initial_guess(cfg, z_true):
    rng = np.random.default_rng(cfg.seed)
    if cfg.initial == "truth":
        z0 = z_true.copy()
        if cfg.initial_perturbation > 0:
            d = rng.standard_normal(z_true.shape) + 1j * rng.standard_normal(z_true.shape)
            z0 += (cfg.initial_perturbation * np.linalg.norm(z_true) / np.linalg.norm(d)) * d
        return z0
    n = cfg.n
    return rng.random((n, n)) + 1j * rng.random((n, n))


def noise_seed(cfg):
    # offset so that noise draws never share a stream with the initial guess
    return cfg.seed + 1


class _Recorder:
    def __init__(self, z_true, counter):
        self.z_true = z_true
        self.counter = counter
        self.records = []
        self._phis = []

    def __call__(self, z, value):
        if not np.isfinite(value) or not np.all(np.isfinite(z)):
            raise NumericalError("non-finite iterate or objective value")
        self._phis.append(float(value))
        j = len(self._phis) - 1
        try:
            c = convergence_factor(self._phis, 0.0, j) if j else 1.0
        except MetricError:
            c = 0.0
        self.records.append(ConvergenceRecord(
            cycle=j, weighted_evals=float(self.counter.weighted_evals), phi=float(value),
            rel_err=relative_error(z, self.z_true), mag_err=magnitude_rel_error(z, self.z_true),
            phase_ssim=phase_ssim(z, self.z_true) if self.z_true.shape[0] >= 11 else float("nan"),
            conv_factor=c))


def run_solver(cfg, geometry, data, z0, z_true):
    """Run the configured solver from ``z0``; returns ``(records, z, counter, reason)``."""
    n = cfg.n
    counter = EvalCounter(n)
    rec = _Recorder(z_true, counter)
    obj = Objective(cfg.objective, geometry, data)
    scfg = SolverConfig(max_iters=10**6, grad_tol_rel=cfg.grad_tol_rel, lbfgs_memory=cfg.lbfgs_memory,
                        linesearch_max=cfg.linesearch_max, pie_gamma=cfg.gamma, budget=cfg.budget)
    if cfg.solver == "pie":
        monitor = pie_monitor(geometry, data)

        def log(z):
            ev = monitor(z)
            rec(z, ev.value)
            return ev

        sweeps = int(np.ceil(cfg.budget))
        rep = pie(z0, geometry, data, cfg.gamma, sweeps, counter, monitor=log, budget=cfg.budget)
    else:
        first = evaluate(obj, z0, counter)
        rec(z0, first.value)
        cb = lambda z, ev: rec(z, ev.value)  # noqa: E731
        if cfg.solver == "lbfgs":
            rep = lbfgs(obj, z0, scfg, counter, initial=first, callback=cb)
        elif cfg.solver == "tn":
            rep = truncated_newton(obj, z0, scfg, counter, callback=cb, initial=first)
        else:
            hier = build_hierarchy(geometry, data, cfg.mgopt_depth, kind=cfg.objective, k1=cfg.k1,
                                   k2=cfg.k2, coarsest_max_iters=cfg.coarse_cap(),
                                   coarse_tol=cfg.coarse_tol, smooth_tol=cfg.smooth_tol,
                                   lbfgs_memory=cfg.lbfgs_memory, linesearch_max=cfg.linesearch_max)
            rep = mgopt_driver(hier, z0, cfg.budget, counter, grad_tol_rel=cfg.grad_tol_rel,
                               callback=lambda i, z, ev: rec(z, ev.value), initial=first)
    return rec.records, rep.final_iterate, counter, rep.termination_reason


def work_allocation_table(counter, title=None):
    """Per-grid evaluation counts and the fine-grid-weighted total as text."""
    levels = sorted(counter.per_level)
    heads = [f"{counter.sizes[l]}x{counter.sizes[l]}" for l in levels]
    counts = [str(counter.per_level[l]) for l in levels]
    total = f"{counter.weighted_evals:g}"
    widths = [max(len(h), len(c)) for h, c in zip(heads, counts)]
    label_w = len("function/gradient evaluations")
    lines = []
    if title:
        lines.append(title)
    lines.append("grid".ljust(label_w) + "".join(f"  {h:>{w}}" for h, w in zip(heads, widths))
                 + "  weighted total")
    lines.append("function/gradient evaluations"
                 + "".join(f"  {c:>{w}}" for c, w in zip(counts, widths))
                 + f"  {total:>14}")
    return "\n".join(lines) + "\n"


def _tag(cfg, level):
    name = cfg.solver if cfg.solver != "mgopt" else f"mgopt{cfg.mgopt_depth}"
    if level is None:
        return f"{name}_data"
    return f"{name}_noise{int(round(level * 100)):02d}"


def _datasets(cfg, geometry, truth):
    if cfg.data_path:
        stack = io.load_stack(cfg.data_path)
        if stack.n != cfg.n or stack.num_patterns != geometry.num_probes:
            raise ConfigError(f"{cfg.data_path}: stack of {stack.num_patterns} x {stack.n}^2 does not "
                              f"match n={cfg.n} with {geometry.num_probes} probes")
        yield None, stack
        return
    clean = simulate(truth, geometry)
    for level in cfg.noise_levels:
        yield level, add_noise(clean, NoiseSpec(level, noise_seed(cfg)))


def run_experiment(cfg, write=True):
    """Run ``cfg`` once per noise level; returns a list of :class:`RunResult`.

    With an output directory set (and ``write``), each run writes
    ``<tag>.csv``, ``<tag>_magnitude.pgm``, ``<tag>_phase.pgm`` (each with a
    ``.ptyf`` companion) and ``<tag>_field.ptyf``; a shared
    ``work_allocation.txt`` holds one table per run. With ``data_path`` set
    the stored stack is reconstructed once, without added noise; the images
    still provide the reference for the metrics.
    """
    cfg.validate()
    truth = ground_truth(cfg).object
    geometry = standard_scan(cfg.n)
    z0 = initial_guess(cfg, truth)
    out = Path(cfg.output_dir) if (write and cfg.output_dir) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        io.save_field(out / "truth_field.ptyf", truth)
    results, tables = [], []
    for level, data in _datasets(cfg, geometry, truth):
        records, z, counter, reason = run_solver(cfg, geometry, data, z0, truth)
        res = RunResult(level, cfg.solver, records, z, counter, reason)
        tag = _tag(cfg, level)
        tables.append(work_allocation_table(counter, f"{tag} ({reason})"))
        if out is not None:
            io.write_history_csv(out / f"{tag}.csv", records)
            io.save_image(np.abs(z), out / f"{tag}_magnitude.pgm")
            io.save_image(phase_image(z), out / f"{tag}_phase.pgm")
            io.save_field(out / f"{tag}_field.ptyf", z)
            res.files = {"csv": out / f"{tag}.csv", "field": out / f"{tag}_field.ptyf"}
        results.append(res)
    if out is not None:
        (out / "work_allocation.txt").write_text("\n".join(tables))
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return results
