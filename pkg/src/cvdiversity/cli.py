"""Command-line driver: ``cvdiv <kind> [--preset NAME] [options]``."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import DomainError
from .experiments import KINDS, PRESETS, emit_csv, format_csv, parse_spec, read_config, run_experiment

# (flag, settings key, help)
_OPTIONS = [
    ("--placement", "placement", "postprocessing | post-amplification | pre-amplification | none"),
    ("--combine-eta", "combine_eta", "receiver beam-splitter transmittivity (two arms)"),
    ("--gains", "gains", "fixed gain list, one per arm (default: invert the mean loss)"),
    ("--order", "order", "diversity order of the fidelity scheme"),
    ("--sigma", "sigma", "fading strength sigma_T"),
    ("--floor", "floor", "lower truncation of the transmittivity"),
    ("--x", "x", "input coherent amplitude, x quadrature"),
    ("--p", "p", "input coherent amplitude, p quadrature"),
    ("--v-in", "v_in", "modulation variance (shot-noise units)"),
    ("--beta", "beta", "reconciliation efficiency"),
    ("--detection", "detection", "homodyne | heterodyne"),
    ("--t-eff-rule", "t_eff_rule", "arithmetic | amplitude"),
    ("--mean-T", "mean_T", "axis of mean transmittivities"),
    ("--n-th", "n_th", "axis of thermal occupations"),
    ("--eta-ct", "eta_ct", "axis of crosstalk transmittivities"),
    ("--orders", "orders", "axis of diversity orders N"),
    ("--loss-db", "loss_db", "axis of mean losses in dB"),
    ("--samples", "samples", "Monte Carlo sample count"),
    ("--nodes", "nodes", "Gauss-Legendre nodes per channel"),
    ("--seed", "seed", "Monte Carlo seed"),
    ("--workers", "workers", "parallel worker threads"),
]

_AXIS_HELP = "Axes take a comma list or start:stop:count."


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvdiv", description="Fading-channel diversity experiments.")
    parser.add_argument("--version", action="version", version=f"cvdiv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("presets", help="list figure presets")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment", epilog=_AXIS_HELP)
        p.add_argument("--preset", choices=[k for k, v in PRESETS.items() if v["kind"] == kind])
        p.add_argument("--config", metavar="PATH", help="key=value file; flags override it")
        p.add_argument("--out", metavar="PATH", help="CSV path (default: stdout)")
        p.add_argument("--method", choices=["quad", "quadrature", "mc", "monte-carlo"])
        p.add_argument("--units", choices=["shot-noise", "paper"])
        for flag, key, text in _OPTIONS:
            p.add_argument(flag, dest=key, metavar="VALUE", help=text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        for name, preset in PRESETS.items():
            extras = " ".join(f"{k}={v}" for k, v in preset.items() if k != "kind")
            print(f"{name:30s} {preset['kind']:20s} {extras}")
        return 0
    keys = [key for _, key, _ in _OPTIONS] + ["out", "method", "units"]
    settings = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    try:
        config = read_config(args.config) if args.config else {}
        spec = parse_spec(args.command, settings, args.preset, config)
        table = run_experiment(spec)
        if spec.out:
            emit_csv(table, spec.out)
        else:
            sys.stdout.write(format_csv(table))
    except DomainError as exc:
        print(f"cvdiv: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cvdiv: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
