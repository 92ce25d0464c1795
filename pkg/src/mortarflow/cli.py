"""Command-line entry points: run, compare, gen-perm, validate."""

import argparse
import os
import sys

import numpy as np

from .config import load_config, save_config
from .driver import compare_report, format_report, run, saturation_error
from .errors import MortarFlowError
from .io import load_run, save_run, write_timeseries
from .media import save_media_text, synth_media


def _threads_default() -> int:
    env = os.environ.get("POROUS_MORTAR_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _cmd_run(args) -> int:
    from dataclasses import replace

    config = load_config(args.config)
    updates = {}
    if args.mode:
        updates["mode"] = args.mode
    if args.out:
        updates["output_dir"] = args.out
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.seed is not None:
        updates["seed"] = args.seed
        updates["media_seed"] = args.seed
    if updates:
        config = replace(config, **updates)
    outdir = config.output_dir or "run_output"
    result = run(config, progress=not args.quiet)
    save_run(result, outdir)
    if not args.quiet:
        print(f"run complete: {result.n_steps} steps, outputs in {outdir}/")
        print(f"wall time {result.timings['total']:.2f} s "
              f"(flow stage {result.flow_stage_seconds:.2f} s)")
    return 0


def _cmd_compare(args) -> int:
    run_a = load_run(args.run_dir)
    run_b = load_run(args.ref_dir)
    err = saturation_error(run_a, run_b)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    write_timeseries(run_a.times, np.nan_to_num(err.per_step),
                     os.path.join(outdir, "saturation_error.csv"))
    write_timeseries(run_a.times, run_a.watercut, os.path.join(outdir, "watercut_run.csv"))
    write_timeseries(run_b.times, run_b.watercut, os.path.join(outdir, "watercut_ref.csv"))
    rows = compare_report(run_a, run_b)
    table = format_report(rows)
    with open(os.path.join(outdir, "comparison.txt"), "w") as fh:
        fh.write(table + "\n")
    print(table)
    print(f"average saturation error: {err.average:.6f}")
    return 0


def _cmd_gen_perm(args) -> int:
    field = synth_media(
        args.kind,
        tuple(args.dims),
        seed=args.seed,
        contrast=args.contrast,
        correlation=args.correlation,
        porosity=args.porosity,
    )
    save_media_text(field, args.out)
    print(f"wrote {args.kind} field {tuple(args.dims)} to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    from .validate import run_validation

    ok = run_validation(verbose=True)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mortarflow",
        description="Two-phase flow simulator with a coarse mortar interface pressure solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a simulation from a config file")
    p_run.add_argument("--config", required=True, help="path to the run configuration")
    p_run.add_argument("--mode", choices=["mmmfem", "fine"], help="override solver mode")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--threads", type=int, default=_threads_default())
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="saturation-error and watercut comparison of two runs")
    p_cmp.add_argument("run_dir", help="output directory of the run under test")
    p_cmp.add_argument("ref_dir", help="output directory of the reference run")
    p_cmp.add_argument("--out", help="directory for comparison files")
    p_cmp.set_defaults(func=_cmd_compare)

    p_gen = sub.add_parser("gen-perm", help="write a synthetic permeability/porosity field")
    p_gen.add_argument("--kind", default="channel",
                       choices=["uniform", "layered", "lognormal", "channel"])
    p_gen.add_argument("--dims", type=int, nargs="+", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--contrast", type=float, default=1e3)
    p_gen.add_argument("--correlation", type=float, default=3.0)
    p_gen.add_argument("--porosity", type=float, default=0.2)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen_perm)

    p_val = sub.add_parser("validate", help="run the built-in invariant checks")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MortarFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
