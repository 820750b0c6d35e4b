"""DMA engines, access patterns and the shared memory port."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .simcore import ClockDomain, Engine, ns
from .smmu import Path, SmmuModel, TranslationOutcome
from .tlb import PAGE_SHIFT, PAGE_SIZE, Access

BEAT_BYTES = 16
MIN_PAYLOAD = 16
MAX_PAYLOAD = 4096


@dataclass(frozen=True)
class CircularPages:
    """First address of ``n_pages`` consecutive pages, wrapping around."""

    n_pages: int
    base_va: int = 0

    def __post_init__(self):
        if self.n_pages < 1:
            raise ValueError("n_pages must be >= 1")

    def va(self, i: int) -> int:
        return self.base_va + (i % self.n_pages) * PAGE_SIZE

    def vpns(self) -> list[int]:
        base = self.base_va >> PAGE_SHIFT
        return [base + k for k in range(self.n_pages)]


@dataclass(frozen=True)
class Striped:
    """Channel ``channel_index`` of ``channel_count`` owns every ``channel_count``-th page."""

    n_pages: int
    channel_count: int
    channel_index: int = 0
    base_va: int = 0

    def __post_init__(self):
        if self.channel_count < 1 or self.n_pages % self.channel_count:
            raise ValueError(f"{self.n_pages} pages do not split across {self.channel_count} channels")
        if not 0 <= self.channel_index < self.channel_count:
            raise ValueError("channel_index out of range")

    @property
    def pages_per_channel(self) -> int:
        return self.n_pages // self.channel_count

    def va(self, i: int) -> int:
        k = i % self.pages_per_channel
        return self.base_va + (self.channel_index + k * self.channel_count) * PAGE_SIZE

    def vpns(self) -> list[int]:
        return [self.va(i) >> PAGE_SHIFT for i in range(self.pages_per_channel)]


AccessPattern = Union[CircularPages, Striped]


@dataclass(frozen=True)
class DmaEngineConfig:
    engine_id: int
    stream: int
    clock: ClockDomain
    tbu_id: int
    pattern: AccessPattern
    buffer_va: int
    payload_bytes: int = 16
    base_cycles: int = 18
    # request the destination translation while the read burst is still running
    overlap_write_translation: bool = True

    def __post_init__(self):
        if not MIN_PAYLOAD <= self.payload_bytes <= MAX_PAYLOAD:
            raise ValueError(f"payload {self.payload_bytes} B outside [{MIN_PAYLOAD}, {MAX_PAYLOAD}]")
        if self.base_cycles < 2:
            raise ValueError("base_cycles must cover at least one read and one write cycle")

    @property
    def beats(self) -> int:
        return -(-self.payload_bytes // BEAT_BYTES)

    def translations(self) -> set[tuple[int, int]]:
        """Distinct (stream, vpn) pairs this engine touches in steady state."""
        keys = {(self.stream, v) for v in self.pattern.vpns()}
        keys.add((self.stream, self.buffer_va >> PAGE_SHIFT))
        return keys


class Jitter(enum.Enum):
    NONE = "none"
    TWO_POINT = "two_point"


@dataclass(frozen=True)
class MemoryModel:
    """FIFO memory port with independent read and write data channels.

    Reads occasionally return late: with ``jitter_probability`` the data
    arrives ``jitter_cycles`` cycles (of the requesting port) after nominal.
    ``split_channels=False`` funnels both directions through one queue.
    """

    service_time_per_beat: int = ns(2)
    beat_bytes: int = BEAT_BYTES
    jitter: Jitter = Jitter.TWO_POINT
    jitter_cycles: int = 2
    jitter_probability: float = 0.28
    seed: int = 0
    split_channels: bool = True

    def beats(self, payload_bytes: int) -> int:
        return -(-payload_bytes // self.beat_bytes)


@dataclass(frozen=True)
class MemoryGrant:
    start: int
    completion: int
    jitter_cycles: int

    def wait(self, at: int) -> int:
        return self.start - at


class MemoryPort:
    def __init__(self, model: MemoryModel = MemoryModel()):
        self.model = model
        self._free_at = {Access.READ: 0, Access.WRITE: 0}
        self.busy_time = 0
        self._rngs: dict[int, random.Random] = {}

    def free_at(self, rw: Access = Access.READ) -> int:
        return self._free_at[rw if self.model.split_channels else Access.READ]

    def _rng(self, requester: int) -> random.Random:
        rng = self._rngs.get(requester)
        if rng is None:
            # per-requester streams keep one engine's jitter independent of the others
            rng = self._rngs[requester] = random.Random(self.model.seed * 1_000_003 + requester)
        return rng

    def sample_jitter(self, requester: int) -> int:
        m = self.model
        if m.jitter is Jitter.NONE or m.jitter_probability <= 0:
            return 0
        return m.jitter_cycles if self._rng(requester).random() < m.jitter_probability else 0

    def service(
        self,
        payload_bytes: int,
        at: int,
        rw: Access = Access.READ,
        requester: int = 0,
        clock: Optional[ClockDomain] = None,
    ) -> MemoryGrant:
        channel = rw if self.model.split_channels else Access.READ
        start = max(at, self._free_at[channel])
        occupancy = self.model.beats(payload_bytes) * self.model.service_time_per_beat
        self._free_at[channel] = start + occupancy
        self.busy_time += occupancy
        jitter = self.sample_jitter(requester) if rw is Access.READ else 0
        late = clock.cycles(jitter) if clock is not None else 0
        return MemoryGrant(start, start + occupancy + late, jitter)


def memory_service(port: MemoryPort, payload_bytes: int, at: int, clock: Optional[ClockDomain] = None) -> int:
    return port.service(payload_bytes, at, Access.READ, clock=clock).completion


@dataclass
class TransactionRecord:
    engine_id: int
    seq: int
    issue_time: int
    read_path: Optional[Path] = None
    write_path: Optional[Path] = None
    complete_time: Optional[int] = None
    aborted: bool = False
    read_added: int = 0
    write_added: int = 0

    @property
    def latency(self) -> int:
        if self.complete_time is None:
            raise ValueError("transaction still in flight")
        return self.complete_time - self.issue_time


class DmaEngine:
    """Closed-loop DMA master: one outstanding transaction at a time.

    A transaction translates its source page, reads the payload, translates
    the destination buffer and writes the payload back. The payload streams
    from the read channel into the write channel, so the extra beats are paid
    once per transaction. By default the destination translation is requested
    as soon as the read is granted and overlaps the read burst.
    """

    def __init__(
        self,
        sim: Engine,
        smmu: SmmuModel,
        memory: MemoryPort,
        config: DmaEngineConfig,
        on_complete: Optional[Callable[[TransactionRecord], None]] = None,
    ):
        self.sim = sim
        self.smmu = smmu
        self.memory = memory
        self.config = config
        self.on_complete = on_complete
        self.records: list[TransactionRecord] = []
        self.stopped = True
        self.busy = False
        self.limit: Optional[int] = None
        self._seq = 0
        self._read_cycles = config.base_cycles // 2
        self._write_cycles = config.base_cycles - self._read_cycles

    def start(self, at: Optional[int] = None, limit: Optional[int] = None) -> None:
        self.stopped = False
        self.limit = limit
        when = self.config.clock.next_edge(self.sim.now if at is None else at)
        self.sim.schedule_at(when, self._issue)

    def stop(self) -> None:
        self.stopped = True

    def resume(self) -> None:
        """Undo ``stop``; an in-flight transaction simply chains into the next one."""
        if not self.stopped:
            return
        self.stopped = False
        if not self.busy:
            self.sim.schedule_at(self.config.clock.next_edge(self.sim.now), self._issue)

    def issue_transaction(self, at: Optional[int] = None) -> TransactionRecord:
        """Issue a single transaction; its record fills in once the engine runs."""
        if self.busy:
            raise RuntimeError(f"engine {self.config.engine_id} already has a transaction in flight")
        self.limit = self._seq + 1
        self.stopped = False
        when = self.config.clock.next_edge(self.sim.now if at is None else at)
        rec = TransactionRecord(self.config.engine_id, self._seq, when)
        self.busy = True
        self.sim.schedule_at(when, lambda: self._begin(rec))
        return rec

    def _issue(self) -> None:
        if self.stopped or (self.limit is not None and self._seq >= self.limit):
            return
        self.busy = True
        self._begin(TransactionRecord(self.config.engine_id, self._seq, self.sim.now))

    def _begin(self, rec: TransactionRecord) -> None:
        cfg = self.config
        self._seq += 1
        va = cfg.pattern.va(rec.seq)
        self.smmu.request(
            cfg.tbu_id, cfg.stream, va, Access.READ, lambda out: self._read_translated(rec, out), cfg.clock
        )

    def _read_translated(self, rec: TransactionRecord, out: TranslationOutcome) -> None:
        rec.read_path = out.path
        rec.read_added = out.added_latency
        if out.fault:
            self._finish(rec, aborted=True)
            return
        cfg = self.config
        now = self.sim.now
        grant = self.memory.service(cfg.payload_bytes, now, Access.READ, cfg.engine_id)
        clock = cfg.clock
        cycles = self._read_cycles + cfg.beats - 1 + grant.jitter_cycles
        resume = clock.next_edge(now + grant.wait(now)) + clock.cycles(cycles)
        if not cfg.overlap_write_translation:
            self.sim.schedule_at(resume, lambda: self._write_phase(rec))
            return
        # the write starts once both the read burst and the translation are done
        join: dict = {}

        def arrive(key: str, value=None) -> None:
            join[key] = value
            if len(join) == 2:
                self._write_translated(rec, join["out"])

        self.smmu.request(cfg.tbu_id, cfg.stream, cfg.buffer_va, Access.WRITE, lambda o: arrive("out", o), clock)
        self.sim.schedule_at(resume, lambda: arrive("read"))

    def _write_phase(self, rec: TransactionRecord) -> None:
        cfg = self.config
        self.smmu.request(
            cfg.tbu_id,
            cfg.stream,
            cfg.buffer_va,
            Access.WRITE,
            lambda out: self._write_translated(rec, out),
            cfg.clock,
        )

    def _write_translated(self, rec: TransactionRecord, out: TranslationOutcome) -> None:
        rec.write_path = out.path
        rec.write_added = out.added_latency
        if out.fault:
            self._finish(rec, aborted=True)
            return
        cfg = self.config
        now = self.sim.now
        grant = self.memory.service(cfg.payload_bytes, now, Access.WRITE, cfg.engine_id)
        done = cfg.clock.next_edge(now + grant.wait(now)) + cfg.clock.cycles(self._write_cycles)
        self.sim.schedule_at(done, lambda: self._finish(rec))

    def _finish(self, rec: TransactionRecord, aborted: bool = False) -> None:
        rec.complete_time = self.sim.now
        rec.aborted = aborted
        self.records.append(rec)
        self.busy = False
        if self.on_complete is not None:
            self.on_complete(rec)
        if not self.stopped and (self.limit is None or self._seq < self.limit):
            self.sim.schedule_at(self.config.clock.next_edge(self.sim.now), self._issue)


# workload builders

BENCH_STREAM = 0x10
BENCH_BASE_VA = 0x1000_0000
BENCH_BUFFER_VA = 0x2000_0000
INTERF_STREAM_BASE = 0x20
INTERF_BASE_VA = 0x4000_0000
INTERF_BUFFER_VA = 0x7F00_0000
SHARED_TBU = 5


def make_benchmark_workload(
    n_pages: int = 63,
    payload: int = 16,
    base_va: int = BENCH_BASE_VA,
    clock: Optional[ClockDomain] = None,
    tbu_id: int = SHARED_TBU,
    base_cycles: int = 18,
    stream: int = BENCH_STREAM,
    buffer_va: int = BENCH_BUFFER_VA,
) -> DmaEngineConfig:
    if n_pages < 1:
        raise ValueError("n_pages must be >= 1")
    return DmaEngineConfig(
        engine_id=0,
        stream=stream,
        clock=clock or ClockDomain.mhz(100, "fpga"),
        tbu_id=tbu_id,
        pattern=CircularPages(n_pages, base_va),
        buffer_va=buffer_va,
        payload_bytes=payload,
        base_cycles=base_cycles,
    )


def make_interference_workload(
    n_pages: int,
    channels: int = 8,
    clock: Optional[ClockDomain] = None,
    tbu_id: int = SHARED_TBU,
    payload: int = 16,
    base_cycles: int = 60,
    base_va: int = INTERF_BASE_VA,
    buffer_va: int = INTERF_BUFFER_VA,
    first_stream: int = INTERF_STREAM_BASE,
) -> list[DmaEngineConfig]:
    """``channels`` engines with distinct StreamIDs sharing one TBU and one write page."""
    if channels < 1:
        raise ValueError("channels must be >= 1")
    if n_pages % channels:
        raise ValueError(f"{n_pages} pages cannot be split evenly across {channels} channels")
    clock = clock or ClockDomain.mhz(600, "fpd_dma")
    return [
        DmaEngineConfig(
            engine_id=1 + c,
            stream=first_stream + c,
            clock=clock,
            tbu_id=tbu_id,
            pattern=Striped(n_pages, channels, c, base_va),
            buffer_va=buffer_va,
            payload_bytes=payload,
            base_cycles=base_cycles,
        )
        for c in range(channels)
    ]


def footprint(configs: list[DmaEngineConfig]) -> int:
    keys: set[tuple[int, int]] = set()
    for c in configs:
        keys |= c.translations()
    return len(keys)
