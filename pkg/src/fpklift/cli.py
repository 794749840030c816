"""Command-line entry point: fpklift <subcommand> [options]."""

import argparse
import os
import sys

import yaml

from . import harness
from .config import ExperimentConfig, default_output_root
from .exceptions import ConfigError, ModelInconsistencyError, NumericalError

# flag -> config key path
FLAG_KEYS = {
    "model": "model.name",
    "n_particles": "solver.n_particles",
    "dt": "solver.dt",
    "t_final": "solver.t_final",
    "seed": "solver.seed",
    "out": "output.dir",
    "k_paths": "ensemble.k_paths",
    "noise_dim": "model.noise_dim",
    "threads": "runtime.threads",
}


HELP = {
    "simulate-nlfpk": "particle solve of the nonlinear equation with weak-residual and mass checks",
    "coupled": "nonlinear path plus its linear companion, product-test residual",
    "lift-check": "ensemble continuity residual and coordinate transfer",
    "superposition-audit": "assemble a path law from members and audit it",
    "simulate-snlfpk": "common-noise ensemble with stochastic residuals",
    "mgp-check": "martingale orthogonality and covariation statistics",
    "lifted-check": "second-order lifted generator residuals",
    "report": "render summary.txt and summary.json for a run directory",
}


def _add_run_options(p):
    p.add_argument("--config", help="YAML file of flat key paths, e.g. 'solver.dt: 0.001'")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any key path; repeatable")
    p.add_argument("--model")
    p.add_argument("--n-particles", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--k-paths", type=int)
    p.add_argument("--noise-dim", type=int)
    p.add_argument("--threads", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="fpklift", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name in harness.PIPELINES:
        p = sub.add_parser(name, help=HELP[name])
        _add_run_options(p)
        if name == "lift-check":
            p.add_argument("--path-dir", help="directory of saved *path*.json members (default: simulate)")
    rep = sub.add_parser("report", help=HELP["report"])
    rep.add_argument("run_dir")
    return parser


def config_from_args(args):
    """File values first, then ``--set`` pairs, then dedicated flags.

    An output directory left at the default root becomes ``<root>/<subcommand>``.
    """
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(key or "--set", "expected KEY=VALUE")
        overrides[key.strip()] = yaml.safe_load(raw)
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if overrides:
        cfg.update(overrides)
    if cfg.output_dir == default_output_root():
        cfg.output_dir = os.path.join(cfg.output_dir, args.cmd)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "report":
            text, summary = harness.render_report(args.run_dir)
            sys.stdout.write(text)
            return 0 if summary["pass"] else 1
        cfg = config_from_args(args)
        extra = {"path_dir": args.path_dir} if args.cmd == "lift-check" else {}
        status, rows = harness.run(args.cmd, cfg, **extra)
    except ConfigError as exc:
        print(f"fpklift: configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"fpklift: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ModelInconsistencyError) as exc:
        print(f"fpklift: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for r in rows:
        print(f"{'PASS' if r['pass'] else 'FAIL'}  {r['name']}  value={r['value']}  threshold={r['threshold']}")
    print(f"artifacts: {cfg.output_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
