"""Command-line entry point: ``ptychomg <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numerical
failure (non-finite values, or a failed transfer-operator check).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .checks import run_checks
from .experiment import (SOLVERS, ConfigError, ExperimentConfig, NumericalError, ground_truth,
                         noise_seed, run_experiment)
from .field import GeometryError, standard_scan
from .forward import NoiseSpec, add_noise, simulate
from .metrics import MetricError, magnitude_rel_error, phase_ssim, relative_error

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def _levels(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad noise level list {text!r}") from exc


def _config_flags(p):
    # every flag defaults to "absent" so a config file value survives unless overridden
    s = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file with ExperimentConfig keys")
    p.add_argument("--n", type=int, default=s)
    p.add_argument("--magnitude-image", dest="magnitude_image", default=s)
    p.add_argument("--phase-image", dest="phase_image", default=s)
    p.add_argument("--noise-levels", dest="noise_levels", type=_levels, default=s,
                   help="comma separated fractions, e.g. 0,0.05,0.1")
    p.add_argument("--seed", type=int, default=s)


def _solver_flags(p):
    s = argparse.SUPPRESS
    p.add_argument("--solver", choices=SOLVERS, default=s)
    p.add_argument("--depth", dest="mgopt_depth", type=int, default=s)
    p.add_argument("--budget", type=float, default=s, help="weighted evaluation budget")
    p.add_argument("--output-dir", dest="output_dir", default=s)
    p.add_argument("--objective", choices=("distance", "intensity"), default=s)
    p.add_argument("--gamma", type=float, default=s)
    p.add_argument("--memory", dest="lbfgs_memory", type=int, default=s)
    p.add_argument("--linesearch-max", dest="linesearch_max", type=int, default=s)
    p.add_argument("--grad-tol", dest="grad_tol_rel", type=float, default=s)
    p.add_argument("--k1", type=int, default=s)
    p.add_argument("--k2", type=int, default=s)
    p.add_argument("--coarsest-max-iters", dest="coarsest_max_iters", type=int, default=s)
    p.add_argument("--coarse-tol", dest="coarse_tol", type=float, default=s)
    p.add_argument("--smooth-tol", dest="smooth_tol", type=float, default=s)
    p.add_argument("--initial", choices=("random", "truth"), default=s)
    p.add_argument("--initial-perturbation", dest="initial_perturbation", type=float, default=s)
    p.add_argument("--data", dest="data_path", default=s, help="reconstruct this stored stack")


def build_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(ExperimentConfig.from_file(args.config).to_dict())
    skip = {"command", "config", "func", "output", "truth_output", "field", "truth", "json",
            "run_dir", "pairs"}
    values.update({k: v for k, v in vars(args).items() if k not in skip})
    return ExperimentConfig.from_dict(values)


def cmd_simulate(args):
    cfg = build_config(args)
    cfg.validate()
    truth = ground_truth(cfg).object
    geometry = standard_scan(cfg.n)
    level = cfg.noise_levels[0]
    stack = add_noise(simulate(truth, geometry), NoiseSpec(level, noise_seed(cfg)))
    io.save_stack(args.output, stack)
    if args.truth_output:
        io.save_field(args.truth_output, truth)
    print(f"wrote {stack.num_patterns} patterns of {stack.n}x{stack.n} (noise {level:g}) to {args.output}")
    return EXIT_OK


def cmd_reconstruct(args):
    cfg = build_config(args)
    results = run_experiment(cfg)
    for res in results:
        last = res.records[-1]
        level = "data" if res.noise_level is None else f"{res.noise_level:g}"
        print(f"noise={level} solver={res.solver} reason={res.termination_reason} "
              f"evals={last.weighted_evals:g} phi={last.phi:.6g} rel_err={last.rel_err:.6g} "
              f"mag_err={last.mag_err:.6g} phase_ssim={last.phase_ssim:.6g}")
    if cfg.output_dir:
        print(f"outputs in {cfg.output_dir}")
    return EXIT_OK


def cmd_metrics(args):
    z = io.load_field(args.field)
    truth = io.load_field(args.truth)
    if not np.all(np.isfinite(z)):
        raise NumericalError(f"{args.field} contains non-finite values")
    out = {"rel_err": relative_error(z, truth), "mag_err": magnitude_rel_error(z, truth)}
    try:
        out["phase_ssim"] = phase_ssim(z, truth)
    except MetricError:
        out["phase_ssim"] = None
    if args.json:
        print(json.dumps(out))
    else:
        for k, v in out.items():
            print(f"{k} {'n/a' if v is None else repr(v)}")
    return EXIT_OK


def cmd_hierarchy_check(args):
    n = getattr(args, "n", 64)
    results = run_checks(n, args.pairs, getattr(args, "seed", 0))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def cmd_report(args):
    run_dir = Path(args.run_dir)
    table = run_dir / "work_allocation.txt"
    print(table.read_text(), end="")
    csvs = sorted(run_dir.glob("*.csv"))
    if csvs:
        print()
        print(f"{'run':<22}{'cycles':>7}{'evals':>10}{'phi':>14}{'rel_err':>11}{'mag_err':>11}{'ssim':>8}")
    for path in csvs:
        rows = io.read_history_csv(path)
        last = rows[-1]
        print(f"{path.stem:<22}{last['cycle']:>7}{last['weighted_evals']:>10.4g}{last['phi']:>14.6g}"
              f"{last['rel_err']:>11.4g}{last['mag_err']:>11.4g}{last['phase_ssim']:>8.4f}")
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(prog="ptychomg",
                                     description="Ptychographic phase retrieval with MG/OPT.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a diffraction stack for the configured object")
    _config_flags(p)
    p.add_argument("--output", required=True, help="stack file (.ptyf)")
    p.add_argument("--truth-output", dest="truth_output", help="also write the true field here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="run a solver at every configured noise level")
    _config_flags(p)
    _solver_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", help="compare a reconstructed field with the truth")
    p.add_argument("--field", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("hierarchy-check", help="property checks of the grid transfers")
    p.add_argument("--n", type=int, default=argparse.SUPPRESS)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_hierarchy_check)

    p = sub.add_parser("report", help="print the work allocation and final metrics of a run")
    p.add_argument("--run-dir", dest="run_dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GeometryError, TypeError) as exc:
        print(f"ptychomg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, io.FormatError) as exc:
        print(f"ptychomg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"ptychomg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"ptychomg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
