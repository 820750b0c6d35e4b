"""Command-line front end: ``smmusim {probe,latency,throughput,trace}``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional, Sequence, TypeVar

from . import report
from .config import ConfigError, RunConfig, load_config
from .experiments import (
    ExperimentKind,
    ExperimentSpec,
    Scenario,
    build_cell,
    latency_matrix,
    probe_micro_tlb_depth,
    run_latency_experiment,
    run_throughput_cell,
    run_throughput_experiment,
)
from .simcore import FS_PER_NS

EXIT_OK = 0
EXIT_FAULTS = 1
EXIT_BAD_CONFIG = 2

T = TypeVar("T")
R = TypeVar("R")


def _csv_list(kind: Callable[[str], T]) -> Callable[[str], list[T]]:
    def parse(text: str) -> list[T]:
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a comma-separated list: {text!r}") from None

    return parse


def _parallel(fn: Callable[[T], R], items: list[T], jobs: int) -> list[R]:
    # results come back in submission order, so output never depends on scheduling
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", help="output directory (default from config)")
    common.add_argument("--freq", type=_csv_list(float), help="FPGA frequencies in MHz, e.g. 100,300")
    common.add_argument("--payload", type=_csv_list(int), help="payload sizes in bytes, e.g. 16,4096")
    common.add_argument("--iterations", type=int, help="measured transactions per cell")
    common.add_argument("--jobs", type=int, help="worker processes for independent cells")

    parser = argparse.ArgumentParser(prog="smmusim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("probe", parents=[common], help="infer the micro-TLB depth from PMU counters")
    p.add_argument("--depth", type=int, help="configured micro-TLB depth to probe")
    p.add_argument("--n-max", type=int, help="largest page count to try")
    sub.add_parser("latency", parents=[common], help="latency matrix (scenario x SMMU x frequency)")
    sub.add_parser("throughput", parents=[common], help="throughput over payload sizes")
    t = sub.add_parser("trace", parents=[common], help="per-transaction trace of one cell")
    t.add_argument("--scenario", choices=[s.value for s in Scenario], default=Scenario.SOLO.value)
    t.add_argument("--disabled", action="store_true", help="trace with the SMMU in bypass")
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg.seed = args.seed
    if args.out:
        cfg.out_dir = args.out
    if args.freq:
        if min(args.freq) <= 0:
            raise ConfigError("--freq values must be positive")
        cfg.frequencies_mhz = args.freq
    if args.payload:
        if not all(16 <= p <= 4096 for p in args.payload):
            raise ConfigError("--payload values must lie in [16, 4096]")
        cfg.payloads = args.payload
    if args.iterations is not None:
        if args.iterations < 1:
            raise ConfigError("--iterations must be >= 1")
        cfg.iterations = args.iterations
    if args.jobs is not None:
        cfg.jobs = max(1, args.jobs)
    return cfg


def base_spec(cfg: RunConfig, kind: ExperimentKind) -> ExperimentSpec:
    return ExperimentSpec(
        kind,
        fpga_freq_mhz=cfg.frequencies_mhz[0],
        iterations=cfg.iterations,
        warmup_iterations=cfg.warmup,
        seed=cfg.seed,
        calibration=cfg.calibration,
        duration_fs=int(round(cfg.duration_us * 1000 * FS_PER_NS)),
    )


def cmd_probe(cfg: RunConfig, args: argparse.Namespace) -> int:
    smmu = cfg.calibration.smmu
    if args.depth is not None:
        if args.depth < 1:
            raise ConfigError("--depth must be >= 1")
        smmu = smmu.with_micro_depth(args.depth)
    n_max = args.n_max or max(cfg.n_max, (args.depth or 0) + 8)
    result = probe_micro_tlb_depth(smmu, n_max=n_max, warmup_iterations=max(cfg.warmup, 1), full_curve=True)
    out = Path(cfg.out_dir) / "probe.csv"
    report.write_text(out, report.format_probe(result.rows))
    if result.depth is None:
        print(f"inferred micro-TLB depth: >= {n_max} (no allocations up to N = {n_max})")
    else:
        print(f"inferred micro-TLB depth: {result.depth}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_latency(cfg: RunConfig, args: argparse.Namespace) -> int:
    base = base_spec(cfg, ExperimentKind.LATENCY)
    results = latency_matrix(
        cfg.frequencies_mhz,
        cfg.smmu_enabled,
        cfg.scenarios,
        base,
        runner=lambda specs: _parallel(run_latency_experiment, specs, cfg.jobs),
    )
    rows = [report.ResultRow.from_latency(r) for r in results]
    out = Path(cfg.out_dir) / "latency.csv"
    report.write_text(out, report.format_results(rows))
    print(report.latency_table(rows))
    print(f"wrote {out}")
    faults = sum(r.faults for r in results)
    if faults:
        print(f"error: {faults} translation faults", file=sys.stderr)
        return EXIT_FAULTS
    return EXIT_OK


def cmd_throughput(cfg: RunConfig, args: argparse.Namespace) -> int:
    rows = []
    for enabled in cfg.smmu_enabled:
        for freq in cfg.frequencies_mhz:
            spec = replace(base_spec(cfg, ExperimentKind.THROUGHPUT), smmu_enabled=enabled, fpga_freq_mhz=freq)
            rows += run_throughput_experiment(
                spec, cfg.payloads, cfg.scenarios, runner=lambda specs: _parallel(run_throughput_cell, specs, cfg.jobs)
            )
    out_rows = [report.ResultRow.from_throughput(r) for r in rows]
    out = Path(cfg.out_dir) / "throughput.csv"
    report.write_text(out, report.format_results(out_rows))
    for enabled in cfg.smmu_enabled:
        for freq in cfg.frequencies_mhz:
            print(f"SMMU {'enabled' if enabled else 'disabled'}, {freq:g} MHz")
            print(report.throughput_table(
                [r for r in out_rows if r.smmu_enabled == enabled and r.fpga_freq_mhz == freq]))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_trace(cfg: RunConfig, args: argparse.Namespace) -> int:
    spec = replace(
        base_spec(cfg, ExperimentKind.TRACE),
        scenario=Scenario(args.scenario),
        smmu_enabled=not args.disabled,
        payload_bytes=cfg.payloads[0],
    )
    cell = build_cell(spec)
    if cell.warmup:
        cell.run_benchmark(cell.warmup)
    cell.run_benchmark(spec.iterations)
    records = sorted(
        (r for e in cell.engines for r in e.records),
        key=lambda r: (r.complete_time, r.engine_id, r.seq),
    )
    out = Path(cfg.out_dir) / "trace.csv"
    report.write_text(out, report.format_trace(report.TraceRow.from_record(r) for r in records))
    print(f"wrote {len(records)} transactions to {out}")
    faults = sum(r.aborted for r in records)
    if faults:
        print(f"error: {faults} translation faults", file=sys.stderr)
        return EXIT_FAULTS
    return EXIT_OK


COMMANDS = {"probe": cmd_probe, "latency": cmd_latency, "throughput": cmd_throughput, "trace": cmd_trace}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
