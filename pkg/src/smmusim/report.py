"""CSV emission/parsing and plain-text summary tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from pathlib import Path as FsPath
from typing import Iterable, Optional, Sequence

from .experiments import LatencyResult, ProbeRow, Scenario, ThroughputRow
from .simcore import to_ns
from .traffic import TransactionRecord

RESULT_HEADER = (
    "kind,scenario,smmu_enabled,fpga_freq_mhz,payload_bytes,avg_ns,mode_ns,max_ns,min_ns,"
    "ratio_avg,ratio_mode,ratio_max,ratio_min,throughput_kb_s,seed"
).split(",")
PROBE_HEADER = ["n_pages", "smmu_access_total", "tlb_alloc_read", "tlb_alloc_write"]
TRACE_HEADER = ["engine_id", "seq", "issue_fs", "read_path", "write_path", "complete_fs", "latency_ns"]

_DECIMAL_FIELDS = {
    "avg_ns", "mode_ns", "max_ns", "min_ns",
    "ratio_avg", "ratio_mode", "ratio_max", "ratio_min", "throughput_kb_s",
}


def _r2(x: Optional[float]) -> Optional[float]:
    return None if x is None else round(x, 2)


@dataclass(frozen=True)
class ResultRow:
    """One CSV line. Decimal fields are stored already rounded to 2 places."""

    kind: str
    scenario: str
    smmu_enabled: bool
    fpga_freq_mhz: float
    payload_bytes: int
    avg_ns: Optional[float] = None
    mode_ns: Optional[float] = None
    max_ns: Optional[float] = None
    min_ns: Optional[float] = None
    ratio_avg: Optional[float] = None
    ratio_mode: Optional[float] = None
    ratio_max: Optional[float] = None
    ratio_min: Optional[float] = None
    throughput_kb_s: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        for name in _DECIMAL_FIELDS:
            object.__setattr__(self, name, _r2(getattr(self, name)))

    @classmethod
    def from_latency(cls, result: LatencyResult) -> "ResultRow":
        s, spec = result.summary, result.spec
        return cls(
            "latency", spec.scenario.value, spec.smmu_enabled, spec.fpga_freq_mhz, spec.payload_bytes,
            s.avg_ns, s.mode_ns, s.max_ns, s.min_ns,
            s.ratio_avg, s.ratio_mode, s.ratio_max, s.ratio_min, None, spec.seed,
        )

    @classmethod
    def from_throughput(cls, row: ThroughputRow) -> "ResultRow":
        return cls(
            "throughput", row.scenario.value, row.smmu_enabled, row.fpga_freq_mhz, row.payload_bytes,
            throughput_kb_s=row.throughput_kb_s, seed=row.seed,
        )


def _fmt(name: str, value) -> str:
    if value is None:
        return ""
    if name in _DECIMAL_FIELDS:
        return f"{value:.2f}"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _parse(name: str, text: str):
    if name in _DECIMAL_FIELDS:
        return float(text) if text else None
    if name == "smmu_enabled":
        if text not in ("true", "false"):
            raise ValueError(f"smmu_enabled must be true/false, got {text!r}")
        return text == "true"
    if name == "fpga_freq_mhz":
        return float(text)
    if name in ("payload_bytes", "seed"):
        return int(text)
    return text


def _write(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read(text: str, header: Sequence[str]) -> list[dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != list(header):
        raise ValueError(f"unexpected header {reader.fieldnames}")
    return list(reader)


def format_results(rows: Iterable[ResultRow]) -> str:
    names = [f.name for f in fields(ResultRow)]
    return _write(RESULT_HEADER, ([_fmt(n, getattr(r, n)) for n in names] for r in rows))


def parse_results(text: str) -> list[ResultRow]:
    return [ResultRow(**{k: _parse(k, v) for k, v in d.items()}) for d in _read(text, RESULT_HEADER)]


def format_probe(rows: Iterable[ProbeRow]) -> str:
    return _write(
        PROBE_HEADER,
        ([str(r.n_pages), str(r.smmu_access_total), str(r.tlb_alloc_read), str(r.tlb_alloc_write)] for r in rows),
    )


def parse_probe(text: str) -> list[ProbeRow]:
    return [ProbeRow(*(int(d[k]) for k in PROBE_HEADER)) for d in _read(text, PROBE_HEADER)]


@dataclass(frozen=True)
class TraceRow:
    engine_id: int
    seq: int
    issue_fs: int
    read_path: str
    write_path: str
    complete_fs: int
    latency_ns: float

    @classmethod
    def from_record(cls, rec: TransactionRecord) -> "TraceRow":
        return cls(
            rec.engine_id, rec.seq, rec.issue_time,
            rec.read_path.value if rec.read_path else "",
            rec.write_path.value if rec.write_path else "",
            rec.complete_time, round(to_ns(rec.latency), 2),
        )


def format_trace(rows: Iterable[TraceRow]) -> str:
    return _write(
        TRACE_HEADER,
        (
            [str(r.engine_id), str(r.seq), str(r.issue_fs), r.read_path, r.write_path,
             str(r.complete_fs), f"{r.latency_ns:.2f}"]
            for r in rows
        ),
    )


def parse_trace(text: str) -> list[TraceRow]:
    return [
        TraceRow(int(d["engine_id"]), int(d["seq"]), int(d["issue_fs"]), d["read_path"], d["write_path"],
                 int(d["complete_fs"]), float(d["latency_ns"]))
        for d in _read(text, TRACE_HEADER)
    ]


def write_text(path: FsPath, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# tables

_METRICS = [("avg_ns", "ratio_avg", "Average"), ("mode_ns", "ratio_mode", "Peak density"),
            ("max_ns", "ratio_max", "Max"), ("min_ns", "ratio_min", "Min")]


def latency_table(rows: Sequence[ResultRow]) -> str:
    """Metric blocks side by side, one column per scenario, ratios in parentheses."""
    scenarios = [s.value for s in Scenario if any(r.scenario == s.value for r in rows)]
    by_key = {(r.smmu_enabled, r.fpga_freq_mhz, r.scenario): r for r in rows}
    groups = sorted({(r.smmu_enabled, r.fpga_freq_mhz) for r in rows})
    cell_w = 18

    def cell(r: Optional[ResultRow], value: str, ratio: str) -> str:
        if r is None or getattr(r, value) is None:
            return "-".center(cell_w)
        v = getattr(r, value)
        q = getattr(r, ratio)
        label = "base" if r.scenario == Scenario.SOLO.value else f"{q:.2f}x"
        return f"{v:.2f} ({label})".rjust(cell_w)

    head1 = f"{'SMMU':<9}{'Freq':>7} | " + " | ".join(
        title.center(cell_w * len(scenarios) + len(scenarios) - 1) for _, _, title in _METRICS
    )
    head2 = f"{'':<9}{'':>7} | " + " | ".join(
        " ".join(s.rjust(cell_w) for s in scenarios) for _ in _METRICS
    )
    lines = [head1, head2, "-" * len(head2)]
    for enabled, freq in groups:
        parts = []
        for value, ratio, _ in _METRICS:
            parts.append(" ".join(cell(by_key.get((enabled, freq, s)), value, ratio) for s in scenarios))
        flag = "enabled" if enabled else "disabled"
        lines.append(f"{flag:<9}{freq:>4g}MHz | " + " | ".join(parts))
    return "\n".join(lines)


def throughput_table(rows: Sequence[ResultRow]) -> str:
    scenarios = [s.value for s in Scenario if any(r.scenario == s.value for r in rows)]
    by_key = {(r.payload_bytes, r.scenario): r.throughput_kb_s for r in rows}
    payloads = sorted({r.payload_bytes for r in rows})
    lines = [f"{'payload(B)':>10} " + " ".join(f"{s + ' KB/s':>16}" for s in scenarios)
             + (f" {'reduction':>10}" * (len(scenarios) - 1))]
    for p in payloads:
        vals = [by_key.get((p, s)) for s in scenarios]
        line = f"{p:>10} " + " ".join(f"{v:>16.2f}" if v is not None else f"{'-':>16}" for v in vals)
        solo = by_key.get((p, Scenario.SOLO.value))
        for s, v in zip(scenarios, vals):
            if s == Scenario.SOLO.value:
                continue
            line += f" {(solo - v) / solo * 100:>9.1f}%" if solo and v is not None else f" {'-':>10}"
        lines.append(line)
    return "\n".join(lines)
