"""Command-line experiment runner.

    rotphase simulate CONFIG [--seed N] [--out-dir DIR] [--threads N]
    rotphase fit DATASET... [--shared-f0] [--float-contrast] [--f0-init F] [--out-dir DIR]
    rotphase compare RUN_A RUN_B [--tol 1e-6]
    rotphase configs

Exit codes: 1 config error (or compare tolerance exceeded), 2 simulation
error or missing output, 3 fit failure.
"""

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import bundled_config_path, bundled_configs, load_config
from .errors import (AmbiguousCalibration, ConfigError, DegenerateDrive, IllConditioned,
                     MissingOutput, NoConvergence, NoPeak, OnAxis, StepTooCoarse, UnwrapFailure)

EXIT_CONFIG = 1
EXIT_SIMULATION = 2
EXIT_FIT = 3

_SIM_ERRORS = (DegenerateDrive, UnwrapFailure, StepTooCoarse, NoPeak, OnAxis, ValueError)
_FIT_ERRORS = (NoConvergence, IllConditioned, AmbiguousCalibration)


def _resolve_config(name):
    path = Path(name)
    if not path.exists() and bundled_config_path(path.name).exists():
        return bundled_config_path(path.name)
    return path


def cmd_simulate(args):
    from .runner import run_experiment
    cfg = load_config(_resolve_config(args.config))
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.no_figures:
        changes["figures"] = False
    if changes:
        cfg = cfg.with_overrides(**changes)
    out = Path(args.out_dir) if args.out_dir else cfg.base_dir() / cfg.dir
    manifest = run_experiment(cfg, out, threads=args.threads)
    print(manifest)
    return 0


def cmd_fit(args):
    from .runner import fit_datasets, write_manifest
    from .config import ExperimentConfig
    for p in args.datasets:
        if not Path(p).exists():
            raise ConfigError(f"datasets: {p} not found")
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    outputs = fit_datasets(args.datasets, out, shared=args.shared_f0, f0_init=args.f0_init,
                           float_contrast=args.float_contrast)
    cfg = ExperimentConfig(kind="fit", datasets=tuple(str(Path(p).resolve()) for p in args.datasets),
                           shared_f0=args.shared_f0, float_contrast=args.float_contrast,
                           f0_init=args.f0_init, figures=False)
    print(write_manifest(out, cfg, outputs))
    return 0


def cmd_compare(args):
    from .runner import compare_runs
    report = compare_runs(args.run_a, args.run_b)
    worst = 0.0
    print("file\tcolumn\tmax_abs_diff\tscaled_diff")
    for name, col, diff, scaled in report:
        flag = "\tEXCEEDS" if scaled > args.tol else ""
        print(f"{name}\t{col}\t{diff:.3e}\t{scaled:.3e}{flag}")
        worst = max(worst, scaled)
    print(f"max scaled difference {worst:.3e} (tolerance {args.tol:g})")
    return 0 if worst <= args.tol else 1


def cmd_configs(args):
    for path in bundled_configs():
        print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="rotphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment config")
    p.add_argument("config", help="config path, or the name of a bundled config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit fringe datasets")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--shared-f0", action="store_true")
    p.add_argument("--float-contrast", action="store_true")
    p.add_argument("--f0-init", type=float)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="compare two runs column by column")
    p.add_argument("run_a", help="manifest or run directory")
    p.add_argument("run_b")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("configs", help="list bundled configs")
    p.set_defaults(func=cmd_configs)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingOutput as exc:
        print(f"missing output: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except _FIT_ERRORS as exc:
        print(f"fit error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FIT
    except _SIM_ERRORS as exc:
        print(f"simulation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
