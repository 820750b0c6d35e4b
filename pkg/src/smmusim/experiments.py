"""Experiment harness: depth probe, latency matrix and throughput sweep."""

from __future__ import annotations

import enum
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

from .simcore import FS_PER_NS, ClockDomain, Engine, to_ns
from .smmu import SMMU_CLOCK, LatencyParams, PmuEvent, SmmuConfig, SmmuModel
from .traffic import (
    BENCH_BASE_VA,
    SHARED_TBU,
    DmaEngine,
    DmaEngineConfig,
    MemoryModel,
    MemoryPort,
    TransactionRecord,
    make_benchmark_workload,
    make_interference_workload,
)
from .tlb import PAGE_SHIFT

# physical frames live far away from every virtual range used by the workloads
PHYS_OFFSET_PAGES = 0x100000
FPGA_FREQUENCIES_MHZ = (100, 150, 300)
DEFAULT_PAYLOADS = (16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
FS_PER_MS = 10**12


class ExperimentKind(enum.Enum):
    PROBE = "probe"
    LATENCY = "latency"
    THROUGHPUT = "throughput"
    TRACE = "trace"


class Scenario(enum.Enum):
    SOLO = "solo"
    INTERF_TBU = "interf_tbu"
    INTERF_TCU = "interf_tcu"


# interferer page counts: together with the 8 per-stream write pages they
# exactly fill the micro-TLB (56 + 8) or the macro-TLB (1992 + 8)
INTERFERENCE_PAGES = {Scenario.INTERF_TBU: 56, Scenario.INTERF_TCU: 1992}


@dataclass(frozen=True)
class Calibration:
    """Every tunable timing constant of the platform model in one place."""

    smmu: SmmuConfig = SmmuConfig()
    memory: MemoryModel = MemoryModel()
    bench_pages: int = 63
    bench_base_cycles: int = 18
    interf_clock_mhz: float = 600
    interf_channels: int = 8
    interf_base_cycles: int = 60
    interf_payload: int = 16

    def with_seed(self, seed: int) -> "Calibration":
        return replace(self, memory=replace(self.memory, seed=seed))


def default_calibration() -> Calibration:
    svc = 2 * SMMU_CLOCK.period_fs
    smmu = SmmuConfig(latencies=LatencyParams(tbu_service=svc, tcu_service=svc))
    return Calibration(smmu=smmu)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: ExperimentKind
    scenario: Scenario = Scenario.SOLO
    fpga_freq_mhz: float = 100
    smmu_enabled: bool = True
    payload_bytes: int = 16
    iterations: int = 10_000
    # full passes over the benchmark's page pattern before measuring
    warmup_iterations: int = 3
    seed: int = 0
    calibration: Calibration = field(default_factory=default_calibration)
    # throughput window, simulated time
    duration_fs: int = 500 * 1000 * FS_PER_NS
    # overrides the benchmark page count (e.g. to force cold misses)
    bench_pages: Optional[int] = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.warmup_iterations < 0:
            raise ValueError("warmup_iterations must be >= 0")

    @property
    def clock(self) -> ClockDomain:
        return ClockDomain.mhz(self.fpga_freq_mhz, "fpga")


@dataclass
class Cell:
    """One wired-up simulator instance: benchmark engine plus optional interferers."""

    sim: Engine
    smmu: SmmuModel
    memory: MemoryPort
    bench: DmaEngine
    interferers: list[DmaEngine]
    warmup: int

    @property
    def engines(self) -> list[DmaEngine]:
        return [self.bench, *self.interferers]

    def run_benchmark(self, count: int) -> list[TransactionRecord]:
        """Run until the benchmark finished ``count`` more transactions; return them."""
        start = len(self.bench.records)
        target = self.bench._seq + count

        def done(rec: TransactionRecord) -> None:
            if rec.seq + 1 >= target:
                for e in self.interferers:
                    e.stop()

        self.bench.on_complete = done
        self.bench.start(limit=target)
        for e in self.interferers:
            e.resume()
        self.sim.run_until()
        return self.bench.records[start:]


def map_workloads(smmu: SmmuModel, configs: Iterable[DmaEngineConfig]) -> None:
    for c in configs:
        for vpn in c.pattern.vpns() + [c.buffer_va >> PAGE_SHIFT]:
            smmu.map_page(c.stream, vpn, vpn + PHYS_OFFSET_PAGES)


def build_cell(spec: ExperimentSpec) -> Cell:
    cal = spec.calibration
    sim = Engine()
    smmu = SmmuModel(sim, replace(cal.smmu, enabled=spec.smmu_enabled))
    memory = MemoryPort(replace(cal.memory, seed=spec.seed))
    n_pages = spec.bench_pages if spec.bench_pages is not None else cal.bench_pages
    bench_cfg = make_benchmark_workload(
        n_pages=n_pages, payload=spec.payload_bytes, clock=spec.clock, base_cycles=cal.bench_base_cycles
    )
    configs = [bench_cfg]
    if spec.scenario is not Scenario.SOLO:
        configs += make_interference_workload(
            INTERFERENCE_PAGES[spec.scenario],
            channels=cal.interf_channels,
            clock=ClockDomain.mhz(cal.interf_clock_mhz, "fpd_dma"),
            payload=cal.interf_payload,
            base_cycles=cal.interf_base_cycles,
        )
    map_workloads(smmu, configs)
    engines = [DmaEngine(sim, smmu, memory, c) for c in configs]
    return Cell(sim, smmu, memory, engines[0], engines[1:], spec.warmup_iterations * n_pages)


# statistics


def mode_estimate(values_ns: Sequence[float], bin_ns: float = 1.0) -> float:
    """Mean of the samples in the most populated ``bin_ns``-wide bin.

    Ties go to the lowest bin. Samples are binned by flooring, so a cluster at
    exactly 180.00 ns reports 180.00.
    """
    if not values_ns:
        raise ValueError("no samples")
    bins = Counter(math.floor(v / bin_ns + 1e-9) for v in values_ns)
    best = max(bins.values())
    peak = min(b for b, n in bins.items() if n == best)
    members = [v for v in values_ns if math.floor(v / bin_ns + 1e-9) == peak]
    return statistics.fmean(members)


@dataclass(frozen=True)
class LatencySummary:
    avg_ns: float
    mode_ns: float
    max_ns: float
    min_ns: float
    samples: int
    ratio_avg: Optional[float] = None
    ratio_mode: Optional[float] = None
    ratio_max: Optional[float] = None
    ratio_min: Optional[float] = None

    @classmethod
    def from_samples(cls, values_ns: Sequence[float]) -> "LatencySummary":
        return cls(
            avg_ns=statistics.fmean(values_ns),
            mode_ns=mode_estimate(values_ns),
            max_ns=max(values_ns),
            min_ns=min(values_ns),
            samples=len(values_ns),
        )

    def relative_to(self, baseline: "LatencySummary") -> "LatencySummary":
        return replace(
            self,
            ratio_avg=self.avg_ns / baseline.avg_ns,
            ratio_mode=self.mode_ns / baseline.mode_ns,
            ratio_max=self.max_ns / baseline.max_ns,
            ratio_min=self.min_ns / baseline.min_ns,
        )


@dataclass
class LatencyResult:
    spec: ExperimentSpec
    summary: LatencySummary
    records: list[TransactionRecord]
    faults: int


def run_latency_experiment(spec: ExperimentSpec) -> LatencyResult:
    cell = build_cell(spec)
    if cell.warmup:
        cell.run_benchmark(cell.warmup)
    records = cell.run_benchmark(spec.iterations)
    faults = sum(r.aborted for r in records)
    lat = [to_ns(r.latency) for r in records if not r.aborted]
    if not lat:
        raise RuntimeError("every measured transaction faulted")
    return LatencyResult(spec, LatencySummary.from_samples(lat), records, faults)


def latency_matrix(
    frequencies: Sequence[float] = FPGA_FREQUENCIES_MHZ,
    enabled: Sequence[bool] = (False, True),
    scenarios: Sequence[Scenario] = tuple(Scenario),
    base: Optional[ExperimentSpec] = None,
    runner: Optional[Callable[[list[ExperimentSpec]], list[LatencyResult]]] = None,
) -> list[LatencyResult]:
    """Run every (enabled, frequency, scenario) cell and attach baseline ratios.

    The baseline of a cell is the solo cell sharing its enabled flag and
    frequency; it is always run, even if not requested.
    """
    base = base or ExperimentSpec(ExperimentKind.LATENCY)
    wanted = set(scenarios)
    specs = [
        replace(base, smmu_enabled=en, fpga_freq_mhz=f, scenario=s)
        for en in enabled
        for f in frequencies
        for s in Scenario
        if s in wanted or s is Scenario.SOLO
    ]
    results = (runner or (lambda ss: [run_latency_experiment(s) for s in ss]))(specs)
    solo = {(r.spec.smmu_enabled, r.spec.fpga_freq_mhz): r.summary for r in results if r.spec.scenario is Scenario.SOLO}
    out = []
    for r in results:
        if r.spec.scenario not in wanted:
            continue
        r.summary = r.summary.relative_to(solo[(r.spec.smmu_enabled, r.spec.fpga_freq_mhz)])
        out.append(r)
    return out


# throughput


@dataclass(frozen=True)
class ThroughputRow:
    scenario: Scenario
    payload_bytes: int
    fpga_freq_mhz: float
    smmu_enabled: bool
    transactions: int
    elapsed_fs: int
    throughput_kb_s: float
    seed: int = 0


def throughput_kb(payload_bytes: int, transactions: int, elapsed_fs: int) -> float:
    """KiB moved per millisecond of simulated time."""
    return payload_bytes * transactions / 1024 / (elapsed_fs / FS_PER_MS)


def run_throughput_cell(spec: ExperimentSpec) -> ThroughputRow:
    cell = build_cell(spec)
    warm = cell.run_benchmark(max(cell.warmup, 1))
    window_start = warm[-1].complete_time
    deadline = window_start + spec.duration_fs
    done: list[TransactionRecord] = []

    def on_done(rec: TransactionRecord) -> None:
        if rec.complete_time <= deadline and not rec.aborted:
            done.append(rec)
        if rec.complete_time >= deadline:
            for e in cell.engines:
                e.stop()

    cell.bench.start(limit=None)
    cell.bench.on_complete = on_done
    for e in cell.interferers:
        e.resume()
    cell.sim.run_until()
    if not done:
        raise RuntimeError("no transaction completed inside the measurement window")
    elapsed = done[-1].complete_time - window_start
    return ThroughputRow(
        scenario=spec.scenario,
        payload_bytes=spec.payload_bytes,
        fpga_freq_mhz=spec.fpga_freq_mhz,
        smmu_enabled=spec.smmu_enabled,
        transactions=len(done),
        elapsed_fs=elapsed,
        throughput_kb_s=throughput_kb(spec.payload_bytes, len(done), elapsed),
        seed=spec.seed,
    )


def run_throughput_experiment(
    spec: ExperimentSpec,
    payloads: Sequence[int] = DEFAULT_PAYLOADS,
    scenarios: Sequence[Scenario] = tuple(Scenario),
    runner: Optional[Callable[[list[ExperimentSpec]], list[ThroughputRow]]] = None,
) -> list[ThroughputRow]:
    specs = [replace(spec, payload_bytes=p, scenario=s) for p in payloads for s in scenarios]
    return (runner or (lambda ss: [run_throughput_cell(s) for s in ss]))(specs)


def reduction(rows: Sequence[ThroughputRow], payload: int, scenario: Scenario) -> float:
    """Fractional throughput loss of ``scenario`` against solo at one payload."""
    by_key = {(r.payload_bytes, r.scenario): r.throughput_kb_s for r in rows}
    solo = by_key[(payload, Scenario.SOLO)]
    return (solo - by_key[(payload, scenario)]) / solo


def translation_overhead_ns(spec: ExperimentSpec, cold_pages: int = 4096) -> float:
    """Mean latency added per transaction when every source page misses all TLBs.

    The benchmark cycles over more pages than the macro-TLB holds, so each read
    translation walks; the same run with its pages warm in the micro-TLB is
    the reference.
    """
    warm = run_latency_experiment(replace(spec, scenario=Scenario.SOLO, smmu_enabled=True))
    cold = run_latency_experiment(
        replace(spec, scenario=Scenario.SOLO, smmu_enabled=True, bench_pages=cold_pages, warmup_iterations=0)
    )
    return cold.summary.avg_ns - warm.summary.avg_ns


# micro-TLB depth probe


@dataclass(frozen=True)
class ProbeRow:
    n_pages: int
    smmu_access_total: int
    tlb_alloc_read: int
    tlb_alloc_write: int

    @property
    def allocations(self) -> int:
        return self.tlb_alloc_read + self.tlb_alloc_write


@dataclass
class ProbeResult:
    depth: Optional[int]
    rows: list[ProbeRow]
    n_max: int

    @property
    def lower_bound(self) -> bool:
        """True when no knee showed up: the depth is at least ``n_max``."""
        return self.depth is None


def probe_point(
    smmu_config: SmmuConfig, n_pages: int, warmup_iterations: int = 3, tbu_id: int = SHARED_TBU
) -> ProbeRow:
    """Cycle a fresh benchmark over ``n_pages`` pages and count steady-state TLB fills.

    Only the PMU is consulted: after the warm-up passes the counters are
    reset and one more pass over the pages is measured.
    """
    sim = Engine()
    smmu = SmmuModel(sim, replace(smmu_config, enabled=True))
    cfg = make_benchmark_workload(n_pages=n_pages, base_va=BENCH_BASE_VA, tbu_id=tbu_id)
    map_workloads(smmu, [cfg])
    engine = DmaEngine(sim, smmu, MemoryPort(MemoryModel()), cfg)
    engine.start(limit=warmup_iterations * n_pages)
    sim.run_until()
    smmu.pmu_reset(tbu_id)
    engine.start(limit=(warmup_iterations + 1) * n_pages)
    sim.run_until()
    return ProbeRow(
        n_pages,
        smmu.pmu_read(tbu_id, PmuEvent.ACCESS_TOTAL),
        smmu.pmu_read(tbu_id, PmuEvent.ALLOC_READ),
        smmu.pmu_read(tbu_id, PmuEvent.ALLOC_WRITE),
    )


def probe_micro_tlb_depth(
    smmu_config: SmmuConfig,
    n_max: int = 160,
    warmup_iterations: int = 3,
    full_curve: bool = False,
    tbu_id: int = SHARED_TBU,
) -> ProbeResult:
    """Infer the micro-TLB depth from the first page count that causes fills.

    With N source pages plus one destination page the working set is N + 1
    translations, so fills start at N = depth.
    """
    if warmup_iterations < 1:
        raise ValueError("the probe needs at least one warm-up pass")
    rows: list[ProbeRow] = []
    depth = None
    for n in range(1, n_max + 1):
        row = probe_point(smmu_config, n, warmup_iterations, tbu_id)
        rows.append(row)
        if depth is None and row.allocations > 0:
            depth = n
            if not full_curve:
                break
    return ProbeResult(depth, rows, n_max)
