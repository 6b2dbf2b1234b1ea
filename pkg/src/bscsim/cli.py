"""Command-line front end: ``bscsim run | sweep | gen-trace``.

Exit status: 0 success, 1 output could not be written, 2 invalid
configuration or arguments, 3 a session aborted.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .errors import BscError, ConfigError, SessionAbortError, TraceParseError, TraceValidationError
from .metrics import SessionMetrics, aggregate, session_metrics
from .network import SyntheticTraceConfig, generate_synthetic, write_trace
from .scenario import (
    SWEEPABLE,
    SYNTHETIC_KEYS,
    ConfigFileError,
    ScenarioConfig,
    load_config,
    locate_key,
    override,
    read_document,
    resolve,
    run_scenario,
)

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3

SCHEMA_VERSION = 1
METRIC_KEYS = (
    "average_quality", "quality_variance", "switch_count", "interruption_count",
    "startup_delay", "total_stall_time", "average_quality_kbps", "quality_variance_kbps2",
)
TIMELINE_COLUMNS = (
    "seed", "segment", "requested_rate", "rendered_rate", "lower_rate", "lower_arrival",
    "enhancement_arrival", "playout_deadline", "decision_time", "buffer_at_decision",
)
SWEEP_COLUMNS = ("row", "param", "value", "policy", "seed", "runs") + METRIC_KEYS

_metrics_schema = {
    "type": "object",
    "required": list(METRIC_KEYS),
    "additionalProperties": False,
    "properties": {k: {"type": "number"} for k in METRIC_KEYS},
}
SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scenario", "policy", "basis", "config", "runs", "aggregate"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"type": "string"},
        "policy": {"type": "string"},
        "basis": {"enum": ["requested", "rendered"]},
        "config": {"type": "object"},
        "runs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["seed", "metrics", "stalls"],
                "additionalProperties": False,
                "properties": {
                    "seed": {"type": "integer"},
                    "metrics": _metrics_schema,
                    "stalls": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["start", "duration", "block", "phase"],
                            "additionalProperties": False,
                            "properties": {
                                "start": {"type": "number"},
                                "duration": {"type": "number"},
                                "block": {"type": ["integer", "null"]},
                                "phase": {"enum": ["bootstrap", "steady"]},
                            },
                        },
                    },
                },
            },
        },
        "aggregate": {
            "type": "object",
            "required": ["runs", "seeds", "mean"],
            "additionalProperties": False,
            "properties": {
                "runs": {"type": "integer"},
                "seeds": {"type": "array", "items": {"type": "integer"}},
                "mean": _metrics_schema,
            },
        },
    },
}


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _session_job(job):
    """Run one seed; returns a plain, picklable record."""
    cfg, seed, basis = job
    try:
        res = run_scenario(cfg, seed)
    except SessionAbortError as exc:
        return {"seed": seed, "error": str(exc)}
    m = session_metrics(res, basis)
    phi = cfg.manifest.offset
    stalls = [
        {
            "start": e.start,
            "duration": e.duration,
            "block": e.block,
            "phase": "bootstrap" if res.layered and e.block is not None and e.block < phi else "steady",
        }
        for e in res.player.stall_events
    ]
    timeline = [
        (seed, e.index, e.requested_rate, e.rendered_rate, e.lower_rate, e.lower_arrival,
         e.enhancement_arrival, e.playout_deadline, e.decision_time, e.buffer_at_decision)
        for e in res.ledger
    ]
    return {"seed": seed, "metrics": m, "stalls": stalls, "timeline": timeline}


def _run_jobs(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_session_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_session_job, jobs))


class _Abort(Exception):
    pass


def _collect(cfg: ScenarioConfig, basis: str, workers: int):
    records = _run_jobs([(cfg, s, basis) for s in cfg.seeds], workers)
    for r in records:
        if "error" in r:
            raise _Abort(f"seed {r['seed']}: {r['error']}")
    return records


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if getattr(args, "seeds", None) is not None:
        cfg = override(cfg, "seeds", args.seeds)
    if getattr(args, "basis", None) is not None:
        cfg = dataclasses.replace(cfg, basis=args.basis)
    return cfg


def _check_trace_source(cfg: ScenarioConfig):
    if cfg.trace_path is not None and not cfg.trace_path.is_file():
        raise ConfigFileError(f"trace file not found: {cfg.trace_path}", cfg.source)


def build_summary(cfg: ScenarioConfig, records) -> dict:
    metrics: List[SessionMetrics] = [r["metrics"] for r in records]
    agg = aggregate(metrics, seeds=[r["seed"] for r in records], label=cfg.policy)
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.name,
        "policy": cfg.policy,
        "basis": cfg.basis,
        "config": cfg.echo(),
        "runs": [{"seed": r["seed"], "metrics": r["metrics"].to_dict(), "stalls": r["stalls"]} for r in records],
        "aggregate": {"runs": agg.count, "seeds": list(agg.seeds), "mean": agg.mean.to_dict()},
    }


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    _check_trace_source(cfg)
    records = _collect(cfg, cfg.basis, args.workers)
    summary = build_summary(cfg, records)
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    with open(out / "timeline.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TIMELINE_COLUMNS)
        for r in records:
            for row in r["timeline"]:
                w.writerow([_fmt(x) for x in row])
    mean = summary["aggregate"]["mean"]
    print(
        f"{cfg.name} {cfg.policy} phi={cfg.manifest.offset} runs={len(records)} "
        f"quality={mean['average_quality_kbps']:.1f}kbps switches={mean['switch_count']:.2f} "
        f"stalls={mean['interruption_count']:.2f} -> {out}"
    )
    return EXIT_OK


def _parse_values(tokens: Sequence[str]) -> List[str]:
    values = [v.strip() for tok in tokens for v in tok.split(",")]
    values = [v for v in values if v]
    if not values:
        raise ConfigError("--values must list at least one value")
    return values


def cmd_sweep(args) -> int:
    if args.param not in SWEEPABLE:
        raise ConfigError(f"parameter {args.param!r} is not sweepable; choose from {', '.join(SWEEPABLE)}")
    base = _apply_overrides(load_config(args.config), args)
    _check_trace_source(base)
    values = _parse_values(args.values)
    variants = [(v, override(base, args.param, v)) for v in values]  # validate all before running

    rows = []
    table = []
    for v, cfg in variants:
        records = _collect(cfg, cfg.basis, args.workers)
        for r in records:
            d = r["metrics"].to_dict()
            rows.append(["run", args.param, v, cfg.policy, r["seed"], 1] + [d[k] for k in METRIC_KEYS])
        agg = aggregate([r["metrics"] for r in records]).mean.to_dict()
        rows.append(["aggregate", args.param, v, cfg.policy, "", len(records)] + [agg[k] for k in METRIC_KEYS])
        table.append((v, cfg.policy, len(records), agg))

    out = Path(args.out) if args.out else base.output_dir / f"sweep_{args.param}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    print(f"{'value':>8} {'policy':>7} {'runs':>5} {'kbps':>9} {'switches':>9} {'stalls':>7}")
    for v, pol, n, agg in table:
        print(
            f"{v:>8} {pol:>7} {n:>5} {agg['average_quality_kbps']:9.1f} "
            f"{agg['switch_count']:9.2f} {agg['interruption_count']:7.2f}"
        )
    print(f"-> {out}")
    return EXIT_OK


def load_synthetic_config(path, seed: Optional[int] = None) -> SyntheticTraceConfig:
    """Read a generator config: bare generator keys, or a scenario file."""
    p = resolve(path)
    data, text = read_document(p)
    if "network" in data or "manifest" in data:
        cfg = load_config(p)
        if cfg.synthetic is None:
            raise ConfigFileError("scenario has no [network.synthetic] table", str(p))
        syn = cfg.synthetic
    else:
        table = data["synthetic"] if set(data) == {"synthetic"} else data
        for k in table:
            if k not in SYNTHETIC_KEYS:
                raise ConfigFileError(f"unknown generator key {k!r}", str(p), locate_key(text, k))
        try:
            syn = SyntheticTraceConfig(**table)
        except (ConfigError, TypeError) as exc:
            raise ConfigFileError(str(exc), str(p)) from None
    if seed is not None:
        syn = dataclasses.replace(syn, rng_seed=seed)
    return syn


def cmd_gen_trace(args) -> int:
    syn = load_synthetic_config(args.config, args.seed)
    trace = generate_synthetic(syn)
    write_trace(trace, args.out)
    print(f"wrote {len(trace)} samples to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bscsim", description="Backward-shifted SVC streaming simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario file (TOML or JSON) or preset name")
        p.add_argument("--seeds", type=int, help="run seeds 0..N-1 instead of the configured list")
        p.add_argument("--basis", choices=("requested", "rendered"), help="quality basis for metrics")
        p.add_argument("--workers", type=int, default=1, help="parallel sessions (default 1)")

    p_run = sub.add_parser("run", help="run a scenario over its seeds")
    common(p_run)
    p_run.add_argument("--out", help="output directory (default: run.output_dir)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="vary one parameter over a list of values")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    p_sweep.add_argument("--values", required=True, nargs="+", help="comma or space separated values")
    p_sweep.add_argument("--out", help="output CSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("gen-trace", help="write a synthetic capacity trace as CSV")
    p_gen.add_argument("config", help="generator config or scenario with [network.synthetic]")
    p_gen.add_argument("out", help="output CSV path")
    p_gen.add_argument("--seed", type=int, help="override rng_seed")
    p_gen.set_defaults(func=cmd_gen_trace)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Abort as exc:
        print(f"bscsim: session aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (TraceParseError, TraceValidationError) as exc:
        print(f"bscsim: invalid trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BscError as exc:
        print(f"bscsim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"bscsim: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
