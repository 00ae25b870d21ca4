"""Command line entry point: sweep, spectrum and validate subcommands."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import yaml

from .experiments import AXES, MODELS, SweepSpec, run_spectrum_demo, run_sweep, worker_count
from .geometry import config_from_dict, desk_config, load_config, table_config
from .mle import DEFAULT_GRID
from .pdd import PddConfig

PRESETS = {
    "desk": (desk_config, 10),
    "paper": (table_config, 50),
}


def _models(text):
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in MODELS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown model(s) {bad}; choose from {', '.join(MODELS)}")
    return tuple(names)


def _override(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected key=value")
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value)


def _common(p):
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk", dest="preset", action="store_const", const="desk",
                       help="reduced scenario M=6, N=8, N_s=4, K=2 (default)")
    scale.add_argument("--paper", dest="preset", action="store_const", const="paper",
                       help="full-scale scenario M=10, N=10, N_s=5, K=4, 50 trials")
    p.set_defaults(preset="desk")
    p.add_argument("--config", type=Path, help="YAML scenario file (overrides the preset)")
    p.add_argument("--set", dest="overrides", type=_override, action="append", default=[],
                   metavar="KEY=VALUE", help="single scenario override, e.g. gamma_bar_db=5")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--max-outer", type=int, default=100)
    p.add_argument("--max-sweeps", type=int, default=50)
    p.add_argument("--trials-rand", type=int, default=100,
                   help="Gaussian randomization candidates per surface block")


def build_parser():
    parser = argparse.ArgumentParser(prog="stars-isac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte Carlo sweep of the root CRB over one axis")
    _common(sw)
    sw.add_argument("--axis", choices=AXES, default="gamma_bar")
    sw.add_argument("--values", type=float, nargs="+", default=[0.0, 5.0, 10.0],
                    help="axis values (dB for gamma_bar, element counts otherwise; N for split)")
    sw.add_argument("--split-total", type=int, default=None,
                    help="N + N_s for the split axis (default: preset N + N_s)")
    sw.add_argument("--model", type=_models, default=("independent",),
                    help=f"comma separated subset of {', '.join(MODELS)}")
    sw.add_argument("--trials", type=int, default=None, help="channel realizations per point")
    sw.add_argument("--record-time", action="store_true",
                    help="write wall_time_s into the CSV (breaks byte-identical reruns)")

    sp = sub.add_parser("spectrum", help="MLE spectrum of one echo block per model")
    _common(sp)
    sp.add_argument("--model", type=_models, default=("independent", "random_phase"))
    sp.add_argument("--grid", type=int, nargs=2, default=list(DEFAULT_GRID),
                    metavar=("N_AZ", "N_EL"))
    sp.add_argument("--exact-covariance", action="store_true",
                    help="transmit block with sample covariance equal to R_x")

    va = sub.add_parser("validate", help="run the oracle suites")
    va.add_argument("--quick", action="store_true", help="smaller instance counts")
    va.add_argument("--out", type=Path, default=None, help="optional CSV report path")
    return parser


def resolve_config(args):
    make, default_trials = PRESETS[args.preset]
    config = make()
    if args.config is not None:
        config = load_config(args.config, config)
    if args.overrides:
        config = config_from_dict(dict(args.overrides), config)
    return config.replace(seed=args.seed), default_trials


def _pdd(args):
    return PddConfig(max_outer=args.max_outer, max_sweeps=args.max_sweeps, trials=args.trials_rand)


def cmd_sweep(args):
    config, default_trials = resolve_config(args)
    spec = SweepSpec(base_config=config, axis=args.axis,
                     values=tuple(int(v) if args.axis != "gamma_bar" else v for v in args.values),
                     models=args.model, trials=args.trials or default_trials,
                     output_dir=str(args.out), split_total=args.split_total, seed=args.seed,
                     pdd=_pdd(args), record_time=args.record_time)
    _, summary = run_sweep(spec, worker_count())
    for s in summary:
        print(f"{s['model']:>16} {args.axis}={s['axis_value']:g}: mean root CRB "
              f"{s['mean_root_crb_deg']:.4f} deg ({s['n_feasible']}/{s['n_trials']} feasible)")
    return 0


def cmd_spectrum(args):
    config, _ = resolve_config(args)
    for model in args.model:
        spec, design = run_spectrum_demo(config, model, args.out, args.seed, tuple(args.grid),
                                         _pdd(args), args.exact_covariance, worker_count())
        h, v = spec.argmax_deg
        print(f"{model:>16}: argmax ({h:.2f}, {v:.2f}) deg, root CRB {design.crb.root_crb_deg:.4f} deg")
    return 0


def cmd_validate(args):
    from .validation import run_all
    results = run_all(quick=args.quick)
    for r in results:
        print(r.line())
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["check", "passed", "worst", "tol"])
            for r in results:
                w.writerow([r.name, int(r.passed), f"{r.worst:.6e}", f"{r.tol:.1e}"])
    return 0 if all(r.passed for r in results) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"sweep": cmd_sweep, "spectrum": cmd_spectrum, "validate": cmd_validate}[args.command]
    try:
        return handler(args)
    except (ValueError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
