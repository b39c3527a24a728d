"""Command line entry point: ``okapi-sim {run,check,audit,sweep}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

from .audit import availability_audit
from .checker import IncompleteTrace, check_history
from .config import PROTOCOLS, ConfigError, load_config
from .experiment import PRESETS, preset, run_experiment
from .trace import HistoryTrace

log = logging.getLogger("okapi")


def _configs(args) -> list:
    if args.config:
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.protocol:
            changes["protocol"] = args.protocol
        return [cfg.replace(**changes)] if changes else [cfg]
    return preset(args.preset, args.protocol or "okapi", args.seed or 0)


def _write_run(result, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    result.report.write(out)
    if result.trace is not None:
        result.trace.write(out / "trace.jsonl")
    if result.log.enabled:
        result.log.write(out / "events.jsonl")


def cmd_run(args) -> int:
    configs = _configs(args)
    for i, cfg in enumerate(configs):
        t0 = time.perf_counter()
        result = run_experiment(cfg)
        log.info("run %d/%d finished in %.2fs", i + 1, len(configs), time.perf_counter() - t0)
        print(result.report.text())
        if args.out_dir:
            out = Path(args.out_dir)
            _write_run(result, out / f"run-{i}" if len(configs) > 1 else out)
    return 0


def cmd_check(args) -> int:
    trace = HistoryTrace.read(args.trace)
    try:
        violations = check_history(trace)
    except IncompleteTrace as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    for v in violations:
        print(v)
    print(f"{len(trace.ops)} operations, {len(violations)} violations")
    return 1 if violations else 0


def cmd_audit(args) -> int:
    trace = HistoryTrace.read(args.trace)
    rep = availability_audit(trace, args.failed_dc)
    print(rep.text())
    return 1 if rep.diverged else 0


def _seed_range(text: str) -> range:
    a, sep, b = text.partition("..")
    try:
        lo = int(a)
        hi = int(b) if sep else lo
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return range(lo, hi + 1)


def cmd_sweep(args) -> int:
    protocols = [args.protocol] if args.protocol else list(PROTOCOLS)
    rows = []
    bad = 0
    for proto in protocols:
        for seed in args.seeds:
            for cfg in preset(args.preset, proto, seed):
                result = run_experiment(cfg.replace(keep_trace=True))
                s = result.report.summary
                nviol = len(check_history(result.trace))
                bad += nviol
                row = {
                    "protocol": proto, "seed": seed, "ops": s["completed_ops"], "violations": nviol,
                    "put_wait_prob": s["put_wait_prob"], "rotx_wait_prob": s["rotx_wait_prob"],
                    "rotx_mean_wait_us": s["rotx_mean_wait_us"], "hlc_overflows": s["hlc_overflows"],
                }
                rows.append(row)
                print(" ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    print(f"{len(rows)} runs, {bad} violations")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="okapi-sim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment or preset")
    run.add_argument("--config", help="TOML or JSON experiment file")
    run.add_argument("--seed", type=int)
    run.add_argument("--protocol", choices=PROTOCOLS)
    run.add_argument("--preset", choices=PRESETS, default="default")
    run.add_argument("--out-dir")
    run.set_defaults(fn=cmd_run)

    chk = sub.add_parser("check", help="check a trace for causal-consistency violations")
    chk.add_argument("--trace", required=True)
    chk.set_defaults(fn=cmd_check)

    aud = sub.add_parser("audit", help="compare failed-DC versions visible at healthy DCs")
    aud.add_argument("--trace", required=True)
    aud.add_argument("--failed-dc", type=int, required=True)
    aud.set_defaults(fn=cmd_audit)

    sw = sub.add_parser("sweep", help="run and check a preset over a seed range")
    sw.add_argument("--seeds", type=_seed_range, required=True, help="inclusive range A..B")
    sw.add_argument("--protocol", choices=PROTOCOLS)
    sw.add_argument("--preset", choices=PRESETS, default="sweep")
    sw.add_argument("--out-dir")
    sw.set_defaults(fn=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
