"""Command-line entry point.

Exit status: 0 success, 2 usage or configuration error, 3 simulation
precondition failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .codes import CodeKind, build_code, mask_pattern_from_code, quadratic_residue_sequence, s_order_problem
from .experiments import ConfigError, run_scenario
from .multiplex import demultiplex, monte_carlo_gain, snr_gain, theoretical_gain

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("cha")


class UsageError(Exception):
    pass


def _globals(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="master RNG seed override")
    parser.add_argument("--trials", type=int, default=default, help="Monte-Carlo trial count override")
    parser.add_argument("--outdir", type=Path, default=default, help="output directory override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cha", description="Coded Hadamard aperture simulation tools")
    _globals(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)

    p = sub.add_parser("gen-code", parents=[common], help="generate a weighing matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=["smatrix", "hadamard"], default="smatrix")
    p.add_argument("--format", choices=["matrix", "base", "both"], default="matrix")
    p.add_argument("--out", type=Path, help="matrix CSV path (base goes to <stem>.base.csv); stdout if omitted")
    p.add_argument("--stats", action="store_true", help="print row weight and theoretical gain")

    p = sub.add_parser("mask-svg", parents=[common], help="export a fabrication SVG of the 2n-1 cell mask")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--pitch-mm", type=float, required=True)
    p.add_argument("--diameter-mm", type=float, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a scenario from a JSON config")
    p.add_argument("config", type=Path)

    p = sub.add_parser("demux", parents=[common], help="demultiplex a measurement CSV")
    p.add_argument("measurements", type=Path)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--n", type=int, help="regenerate the order-n cyclic S-matrix")
    src.add_argument("--matrix", type=Path, help="explicit weighing matrix CSV")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("report", parents=[common], help="weighing-design and gain summary tables as CSV")
    p.add_argument("--table", choices=["weighing", "gain"], default="gain")
    p.add_argument("--orders", type=int, nargs="+", default=[31, 59])
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", type=Path, help="CSV path; stdout if omitted")
    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        fileio.atomic_write(out, text)


def cmd_gen_code(args) -> int:
    if args.kind == "smatrix":
        problem = s_order_problem(args.n)
        if problem:
            raise UsageError(f"invalid S-matrix order: {problem}")
        base = quadratic_residue_sequence(args.n)
    else:
        if args.n < 1 or args.n & (args.n - 1):
            raise UsageError(f"Hadamard order must be a power of two, got {args.n}")
        base = None
    w = build_code(args.kind, args.n)
    matrix_csv = "".join(",".join(str(v) for v in row) + "\n" for row in w.entries.tolist())
    base_csv = None if base is None else ",".join(str(int(b)) for b in base) + "\n"
    if args.format in ("base", "both") and base_csv is None:
        raise UsageError("a base sequence exists only for cyclic S-matrices")
    if args.out is None:
        if args.format in ("matrix", "both"):
            sys.stdout.write(matrix_csv)
        if args.format in ("base", "both"):
            sys.stdout.write(base_csv)
    else:
        if args.format in ("matrix", "both"):
            fileio.atomic_write(args.out, matrix_csv)
        if args.format in ("base", "both"):
            target = args.out if args.format == "base" else args.out.with_suffix(".base.csv")
            fileio.atomic_write(target, base_csv)
    if args.stats:
        weight = int(np.abs(w.entries[0]).sum()) if args.kind == "smatrix" else args.n
        print(f"n={args.n} kind={args.kind} row_weight={weight} "
              f"gain={theoretical_gain(args.kind, args.n):.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_mask_svg(args) -> int:
    problem = s_order_problem(args.n)
    if problem:
        raise UsageError(f"invalid S-matrix order: {problem}")
    try:
        mask = mask_pattern_from_code(quadratic_residue_sequence(args.n), args.pitch_mm, args.diameter_mm)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fileio.atomic_write(args.out, fileio.mask_svg(mask))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = fileio.load_config(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "trials") if getattr(args, k, None) is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    outdir = args.outdir if args.outdir is not None else Path(f"{cfg.scenario}_out")
    report = run_scenario(cfg)
    fileio.write_report(report, outdir)
    log.info("wrote %s", outdir / "report.json")
    return EXIT_OK


def cmd_demux(args) -> int:
    times = [row[0] for row in fileio.read_rows(args.measurements)]
    _, values = fileio.read_signal_csv(args.measurements)
    cols = values.shape[0]
    if args.n is not None:
        problem = s_order_problem(args.n)
        if problem:
            raise UsageError(f"invalid S-matrix order: {problem}")
        w = build_code(CodeKind.SMATRIX, args.n)
        if cols != args.n:
            raise UsageError(f"measurement file has {cols} data columns but --n is {args.n}")
    else:
        w = fileio.read_matrix_csv(args.matrix)
        if cols != w.order:
            raise UsageError(f"measurement file has {cols} data columns but the matrix has order {w.order}")
    xhat = demultiplex(values, w)
    rows = [[t] + [repr(float(v)) for v in col] for t, col in zip(times, xhat.T)]
    fileio.atomic_write(args.out, fileio.rows_to_csv(rows))
    log.info("demultiplexed %d x %d samples with %s matrix", cols, len(times), w.kind.value)
    return EXIT_OK


def cmd_report(args) -> int:
    seed = args.seed if args.seed is not None else 0
    trials = args.trials if args.trials is not None else 10_000
    if args.table == "weighing":
        rows = [["n", "design", "weights", "gain"]]
        for n in args.orders:
            rows.append([n, "direct", "1", repr(1.0)])
            if n & (n - 1) == 0:
                rows.append([n, "chemical_balance_hadamard", "-1;1", repr(theoretical_gain("hadamard", n))])
            if not s_order_problem(n):
                rows.append([n, "spring_balance_smatrix", "0;1", repr(theoretical_gain("smatrix", n))])
    else:
        rows = [["n", "calculated_gain", "matrix_gain", "measured_gain", "stderr", "trials", "seed"]]
        for n in args.orders:
            problem = s_order_problem(n)
            if problem:
                raise UsageError(f"invalid S-matrix order: {problem}")
            w = build_code("smatrix", n)
            est = monte_carlo_gain(w, args.sigma, trials, seed)
            rows.append([n, repr(theoretical_gain("smatrix", n)), repr(snr_gain(w)),
                         repr(est.measured_gain), repr(est.stderr), trials, seed])
    _emit(fileio.rows_to_csv(rows), args.out)
    return EXIT_OK


COMMANDS = {
    "gen-code": cmd_gen_code,
    "mask-svg": cmd_mask_svg,
    "simulate": cmd_simulate,
    "demux": cmd_demux,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"cha {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"cha {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME if args.command == "simulate" else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
