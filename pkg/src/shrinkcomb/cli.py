"""Command line entry point: ``run``, ``validate`` and ``plot``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .harness import (
    RunConfig,
    emit_csv,
    emit_per_ue_csv,
    emit_svg_plot,
    emit_trace_csv,
    run_sweep,
)
from .scenario import ConfigError, load_config

log = logging.getLogger("shrinkcomb")


def _fail(kind: str, message: str, code: int = 2) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def cmd_run(args) -> int:
    doc = load_config(args.config)
    scen = doc.setdefault("scenario", {}) if "scenario" in doc else doc
    if args.seed is not None:
        scen["master_seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    run = RunConfig.from_dict(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run_sweep(run, threads=args.threads, keep_trace=args.trace)
    elapsed = time.perf_counter() - t0
    emit_csv(result.records, out / "sweep.csv", timing=args.timing)
    emit_per_ue_csv(result.per_ue, out / "per_ue.csv")
    if args.trace:
        emit_trace_csv(result.traces, out / "trace.csv")
    if not args.no_plot:
        emit_svg_plot(out / "sweep.csv", out / "sweep.svg")
    summary = {
        "trials_per_point": run.trials,
        "resamples": result.resamples,
        "failed_trials": {f"{m}@{v:g}": n for (m, v), n in result.failures.items()},
        "elapsed_s": round(elapsed, 3),
    }
    (out / "run.json").write_text(json.dumps(summary, indent=2) + "\n")
    for r in result.records:
        log.info("%-14s %s=%-6g ser=%.3e alpha=%s", r.method, r.sweep_kind, r.sweep_value, r.ser,
                 "-" if r.mean_alpha is None else f"{r.mean_alpha:.3f}")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_validation

    ok = True
    for name, passed, detail in run_validation():
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def cmd_plot(args) -> int:
    emit_svg_plot(args.csv, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shrinkcomb", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a Monte-Carlo SER sweep")
    r.add_argument("--config", required=True)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, help="worker count (default $SHRINKCOMB_THREADS or 1)")
    r.add_argument("--out", default="out")
    r.add_argument("--trace", action="store_true", help="dump iterative-fit trajectories")
    r.add_argument("--timing", action="store_true", help="fill the wallclock_s column")
    r.add_argument("--no-plot", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="run reduced-size property checks")
    v.set_defaults(func=cmd_validate)

    pl = sub.add_parser("plot", help="render a sweep CSV as SVG")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", str(exc))
    except (OSError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
