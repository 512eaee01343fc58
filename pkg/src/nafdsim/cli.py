"""Command-line front end for the simulation experiments.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import figures, harness
from .harness import ExperimentSpec, TrialRecord
from .scenario import ConfigError, SystemConfig, load_config


def _parse_bits(text):
    try:
        bits = [int(b) for b in text.split(",") if b]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if not bits or any(not 1 <= b <= 16 for b in bits):
        raise argparse.ArgumentTypeError(
            "bits must be a comma-separated list of integers in [1, 16]")
    return bits


def _parse_caps(text):
    return [float(c) for c in text.split(",") if c]


def build_parser():
    p = argparse.ArgumentParser(
        prog="nafdsim",
        description="Cell-free full-duplex mmWave network simulator: "
                    "weighted sum-rate optimization under fronthaul and "
                    "DAC-resolution limits.")
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--config", default=None, help="JSON config path")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output CSV path")
        sp.add_argument("--figures", action="store_true",
                        help="also render a PNG figure next to the CSV")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    sp = sub.add_parser("run", help="one full trial at the configured point")
    common(sp)
    sp.add_argument("--mode", choices=["nafd", "ccfd"], default=None)
    sp.add_argument("--trials", type=int, default=1)

    sp = sub.add_parser("convergence", help="single-realization trace")
    common(sp)

    sp = sub.add_parser("sweep-bits", help="mean rate vs DAC bits, both modes")
    common(sp)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--bits", type=_parse_bits, default=list(range(1, 9)))
    sp.add_argument("--mode", choices=["nafd", "ccfd", "both"], default="both")
    sp.add_argument("--cap", type=_parse_caps, default=[130.0])

    sp = sub.add_parser("cdf", help="objective CDFs per (bits, capacity)")
    common(sp)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--bits", type=_parse_bits, default=list(range(1, 9)))
    sp.add_argument("--cap", type=_parse_caps, default=[50.0, 130.0])

    sp = sub.add_parser("layout", help="dump one geometry realization")
    common(sp)
    sp.add_argument("--mode", choices=["nafd", "ccfd"], default=None)
    return p


def _load_cfg(args) -> SystemConfig:
    if args.config is None:
        cfg = SystemConfig()
    else:
        if not os.path.exists(args.config):
            raise UsageError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    mode = getattr(args, "mode", None)
    if mode in ("nafd", "ccfd"):
        cfg = replace(cfg, mode=mode.upper())
    return cfg


class UsageError(Exception):
    pass


def _fig_path(out):
    return (out[:-4] if out.endswith(".csv") else out) + ".png"


def _cmd_run(cfg, args):
    out = args.out or "run.csv"
    rows = []
    for t in range(args.trials):
        rec, _ = harness.run_trial(cfg, cfg.seed, t)
        rows.append(rec.csv_row())
    harness._write_csv(out, TrialRecord.HEADER, rows)
    print(f"run: {args.trials} trial(s) -> {out}")
    return 0


def _cmd_convergence(cfg, args):
    out = args.out or "convergence.csv"
    spec = ExperimentSpec(kind="Convergence", trials=1, out_path=out)
    rec, trace = harness.run_convergence(cfg, spec)
    if args.figures:
        figures.plot_convergence(trace, _fig_path(out))
    print(f"convergence: {rec.sca_iters} iterations, "
          f"final objective {rec.objective_bpshz:.4g} bps/Hz -> {out}")
    return 0


def _cmd_sweep(cfg, args):
    out = args.out or "sweep_bits.csv"
    modes = {"nafd": ["NAFD"], "ccfd": ["CCFD"],
             "both": ["NAFD", "CCFD"]}[args.mode]
    cap = args.cap[0]
    cfg = replace(cfg, c_dl_bpshz=cap, c_ul_bpshz=cap)
    spec = ExperimentSpec(kind="BitSweep", trials=args.trials,
                          bits_list=args.bits, modes=modes, out_path=out)
    results = harness.run_bit_sweep(cfg, spec, workers=args.workers)
    if args.figures:
        figures.plot_bit_sweep(results, _fig_path(out))
    print(f"sweep-bits: {len(results)} points x {args.trials} trials -> {out}")
    return 0


def _cmd_cdf(cfg, args):
    out = args.out or "cdf.csv"
    caps = [(c, c) for c in args.cap]
    spec = ExperimentSpec(kind="CdfCompare", trials=args.trials,
                          bits_list=args.bits, capacities=caps, out_path=out)
    results = harness.run_cdf_compare(cfg, spec, workers=args.workers)
    if args.figures:
        figures.plot_cdfs(results, _fig_path(out))
    print(f"cdf: {len(results)} points x {args.trials} trials -> {out}")
    return 0


def _cmd_layout(cfg, args):
    out = args.out or "layout.csv"
    spec = ExperimentSpec(kind="LayoutDump", trials=1, out_path=out)
    layout = harness.dump_layout(cfg, spec)
    if args.figures:
        figures.plot_layout(layout, cfg.radius_m, _fig_path(out))
    print(f"layout: {cfg.mode}, radius {cfg.radius_m:g} m -> {out}")
    return 0


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        cfg = _load_cfg(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    dispatch = {"run": _cmd_run, "convergence": _cmd_convergence,
                "sweep-bits": _cmd_sweep, "cdf": _cmd_cdf,
                "layout": _cmd_layout}
    try:
        return dispatch[args.command](cfg, args)
    except Exception as exc:  # runtime failure -> exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
