"""Decentralized SMMU: per-cluster TBUs (micro-TLBs) in front of one shared TCU.

Translation flow for a request arriving at a TBU:

1. The TBU serves requests one lookup at a time in arrival order
   (``tbu_service`` occupancy each). A micro-TLB hit is ready
   ``t_micro_hit`` after service start.
2. A miss is forwarded to the TCU, which performs one macro-TLB lookup per
   ``tcu_service``. A macro hit returns after ``t_macro_hit``.
3. A macro miss takes one of ``ptw_slots`` walkers for ``t_ptw``. The walk
   fills the macro-TLB; every TCU response fills the micro-TLB.
4. A TCU response re-enters the requesting port's clock domain: it is
   sampled on the next port clock edge and pays ``port_sync_cycles`` port
   cycles for the stalled handshake to be replayed.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .simcore import ClockDomain, Engine, SimulationError, ns
from .tlb import PAGE_SHIFT, Access, TlbConfig, TranslationCache

SMMU_CLOCK = ClockDomain.mhz(525, "smmu")


class Path(enum.Enum):
    BYPASS = "Bypass"
    MICRO_HIT = "MicroHit"
    MACRO_HIT = "MacroHit"
    PTW_WALK = "PtwWalk"
    FAULT = "Fault"


class PmuEvent(enum.Enum):
    ACCESS_TOTAL = "smmu_access_total"
    ALLOC_READ = "tlb_alloc_read"
    ALLOC_WRITE = "tlb_alloc_write"


@dataclass(frozen=True)
class LatencyParams:
    t_micro_hit: int = 0
    t_macro_hit: int = SMMU_CLOCK.period_fs
    t_ptw: int = ns(25)
    # walk time when the partial-walk cache hits (only used if that cache is enabled)
    t_ptw_partial: int = ns(10)
    tbu_service: int = SMMU_CLOCK.period_fs
    tcu_service: int = SMMU_CLOCK.period_fs
    port_sync_cycles: int = 7

    def __post_init__(self):
        if not (self.t_micro_hit <= self.t_macro_hit <= self.t_ptw):
            raise ValueError("latencies must satisfy t_micro_hit <= t_macro_hit <= t_ptw")
        if min(self.tbu_service, self.tcu_service, self.port_sync_cycles, self.t_ptw_partial) < 0:
            raise ValueError("negative latency parameter")


def default_tbus(count: int = 6, depth: int = 64) -> tuple[tuple[int, TlbConfig], ...]:
    return tuple((i, TlbConfig(depth)) for i in range(count))


@dataclass(frozen=True)
class SmmuConfig:
    tbus: tuple[tuple[int, TlbConfig], ...] = field(default_factory=default_tbus)
    tcu: TlbConfig = TlbConfig(2000, 4)
    latencies: LatencyParams = LatencyParams()
    enabled: bool = True
    smmu_clock: ClockDomain = SMMU_CLOCK
    ptw_slots: int = 8
    ptw_cache: Optional[TlbConfig] = None
    # deliver responses of one TBU strictly in arrival order (head-of-line blocking)
    in_order_responses: bool = False

    def __post_init__(self):
        ids = [t for t, _ in self.tbus]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate TBU id")
        if self.ptw_slots < 1:
            raise ValueError("ptw_slots must be >= 1")

    def with_micro_depth(self, depth: int, associativity: Optional[int] = None) -> "SmmuConfig":
        tbus = tuple((i, replace(c, depth=depth, associativity=associativity)) for i, c in self.tbus)
        return replace(self, tbus=tbus)


@dataclass(frozen=True)
class TranslationOutcome:
    pa: Optional[int]
    path: Path
    ready_at: int
    requested_at: int
    tbu_id: int
    stream: int
    rw: Access
    # when the TBU started the lookup; TBUs serve requests in arrival order
    serviced_at: Optional[int] = None

    @property
    def added_latency(self) -> int:
        return self.ready_at - self.requested_at

    @property
    def fault(self) -> bool:
        return self.path is Path.FAULT


@dataclass
class PmuCounters:
    smmu_access_total: int = 0
    tlb_alloc_read: int = 0
    tlb_alloc_write: int = 0

    def read(self, event: PmuEvent) -> int:
        return getattr(self, event.value)


@dataclass
class _Request:
    tbu_id: int
    stream: int
    va: int
    rw: Access
    arrival: int
    callback: Callable[[TranslationOutcome], None]
    port: ClockDomain
    order: int = 0
    outcome: Optional[TranslationOutcome] = None
    serviced_at: Optional[int] = None

    @property
    def vpn(self) -> int:
        return self.va >> PAGE_SHIFT


class Tbu:
    def __init__(self, tbu_id: int, config: TlbConfig):
        self.tbu_id = tbu_id
        self.micro = TranslationCache(config, f"tbu{tbu_id}.micro")
        self.pmu = PmuCounters()
        self.free_at = 0
        self.arrivals = 0
        self.pending: deque[_Request] = deque()
        self.last_delivery = 0


PrefetchHook = Callable[[int, int], list[int]]


class SmmuModel:
    """Event-driven SMMU bound to one :class:`Engine`.

    ``request`` is the asynchronous interface used by DMA engines;
    ``translate`` runs the engine until a single request resolves, which is
    convenient for probing the model directly.
    """

    def __init__(self, engine: Engine, config: SmmuConfig = SmmuConfig()):
        self.engine = engine
        self.config = config
        self.lat = config.latencies
        self.enabled = config.enabled
        self.tbus = {i: Tbu(i, c) for i, c in config.tbus}
        self.macro = TranslationCache(config.tcu, "tcu.macro")
        self.walk_cache = TranslationCache(config.ptw_cache, "tcu.ptwc") if config.ptw_cache else None
        self.tcu_free_at = 0
        self._walkers = [0] * config.ptw_slots
        self.page_table: dict[tuple[int, int], int] = {}
        self.prefetch_hook: Optional[PrefetchHook] = None
        self.faults: list[TranslationOutcome] = []
        self.walks = 0

    # page table

    def map_page(self, stream: int, vpn: int, ppn: int) -> None:
        self.page_table[(stream, vpn)] = ppn

    def map_range(self, stream: int, vpn: int, count: int, ppn: int) -> None:
        for i in range(count):
            self.page_table[(stream, vpn + i)] = ppn + i

    # control

    def tbu(self, tbu_id: int) -> Tbu:
        try:
            return self.tbus[tbu_id]
        except KeyError:
            raise KeyError(f"unknown TBU id {tbu_id}") from None

    def set_enabled(self, enabled: bool) -> None:
        if any(t.pending for t in self.tbus.values()):
            raise SimulationError("cannot toggle the SMMU with translations in flight")
        if enabled != self.enabled:
            self.flush()
        self.enabled = enabled

    def flush(self) -> None:
        for t in self.tbus.values():
            t.micro.invalidate()
        self.macro.invalidate()
        if self.walk_cache is not None:
            self.walk_cache.invalidate()

    def pmu_read(self, tbu_id: int, event: PmuEvent) -> int:
        return self.tbu(tbu_id).pmu.read(event)

    def pmu_reset(self, tbu_id: Optional[int] = None) -> None:
        targets = self.tbus.values() if tbu_id is None else [self.tbu(tbu_id)]
        for t in targets:
            t.pmu = PmuCounters()

    # translation

    def request(
        self,
        tbu_id: int,
        stream: int,
        va: int,
        rw: Access,
        callback: Callable[[TranslationOutcome], None],
        port: Optional[ClockDomain] = None,
    ) -> None:
        """Present a translation request at the current simulated time."""
        now = self.engine.now
        tbu = self.tbu(tbu_id)
        if not self.enabled:
            out = TranslationOutcome(va, Path.BYPASS, now, now, tbu_id, stream, rw, now)
            self.engine.schedule(0, lambda: callback(out))
            return
        req = _Request(tbu_id, stream, va, rw, now, callback, port or self.config.smmu_clock, tbu.arrivals)
        tbu.arrivals += 1
        tbu.pending.append(req)
        start = max(now, tbu.free_at)
        tbu.free_at = start + self.lat.tbu_service
        self.engine.schedule_at(start, lambda: self._tbu_lookup(tbu, req))

    def translate(
        self,
        tbu_id: int,
        stream: int,
        va: int,
        rw: Access = Access.READ,
        at: Optional[int] = None,
        port: Optional[ClockDomain] = None,
    ) -> TranslationOutcome:
        result: list[TranslationOutcome] = []
        when = self.engine.now if at is None else at
        self.engine.schedule_at(
            when, lambda: self.request(tbu_id, stream, va, rw, result.append, port)
        )
        while not result:
            if self.engine.pending() == 0:
                raise SimulationError("translation never resolved")
            self.engine.run_until(max_events=1)
        return result[0]

    def _tbu_lookup(self, tbu: Tbu, req: _Request) -> None:
        req.serviced_at = self.engine.now
        tbu.pmu.smmu_access_total += 1
        ppn = tbu.micro.lookup(req.stream, req.vpn, req.rw)
        if ppn is not None:
            self._resolve(tbu, req, Path.MICRO_HIT, ppn, self.engine.now + self.lat.t_micro_hit)
            return
        start = max(self.engine.now, self.tcu_free_at)
        self.tcu_free_at = start + self.lat.tcu_service
        self.engine.schedule_at(start, lambda: self._tcu_lookup(tbu, req))

    def _tcu_lookup(self, tbu: Tbu, req: _Request) -> None:
        now = self.engine.now
        ppn = self.macro.lookup(req.stream, req.vpn, req.rw)
        if ppn is not None:
            self.engine.schedule_at(
                now + self.lat.t_macro_hit, lambda: self._tcu_respond(tbu, req, Path.MACRO_HIT, ppn)
            )
            return
        walk = self.lat.t_ptw
        if self.walk_cache is not None and self.walk_cache.lookup(req.stream, req.vpn >> 9, req.rw) is not None:
            walk = self.lat.t_ptw_partial
        slot_free = heapq.heappop(self._walkers)
        begin = max(now + self.lat.t_macro_hit, slot_free)
        done = begin + walk
        heapq.heappush(self._walkers, done)
        self.walks += 1
        self.engine.schedule_at(done, lambda: self._walk_done(tbu, req))

    def _walk_done(self, tbu: Tbu, req: _Request) -> None:
        ppn = self.page_table.get((req.stream, req.vpn))
        if ppn is None:
            self._tcu_respond(tbu, req, Path.FAULT, None)
            return
        if (req.stream, req.vpn) not in self.macro:
            self.macro.allocate(req.stream, req.vpn, ppn, req.rw)
        # partial-walk cache keeps the last-level table pointer (512 pages per table)
        if self.walk_cache is not None and (req.stream, req.vpn >> 9) not in self.walk_cache:
            self.walk_cache.allocate(req.stream, req.vpn >> 9, req.vpn >> 9, req.rw)
        if self.prefetch_hook is not None:
            for vpn in self.prefetch_hook(req.stream, req.vpn):
                extra = self.page_table.get((req.stream, vpn))
                if extra is not None and (req.stream, vpn) not in self.macro:
                    self.macro.allocate(req.stream, vpn, extra, req.rw)
        self._tcu_respond(tbu, req, Path.PTW_WALK, ppn)

    def _tcu_respond(self, tbu: Tbu, req: _Request, path: Path, ppn: Optional[int]) -> None:
        if ppn is not None and (req.stream, req.vpn) not in tbu.micro:
            tbu.micro.allocate(req.stream, req.vpn, ppn, req.rw)
            if req.rw is Access.READ:
                tbu.pmu.tlb_alloc_read += 1
            else:
                tbu.pmu.tlb_alloc_write += 1
        port = req.port
        ready = port.next_edge(self.engine.now) + port.cycles(self.lat.port_sync_cycles)
        self._resolve(tbu, req, path, ppn, ready)

    def _resolve(self, tbu: Tbu, req: _Request, path: Path, ppn: Optional[int], ready: int) -> None:
        pa = None if ppn is None else (ppn << PAGE_SHIFT) | (req.va & ((1 << PAGE_SHIFT) - 1))
        req.outcome = TranslationOutcome(
            pa, path, ready, req.arrival, req.tbu_id, req.stream, req.rw, req.serviced_at
        )
        if path is Path.FAULT:
            self.faults.append(req.outcome)
        if not self.config.in_order_responses:
            tbu.pending.remove(req)
            self._deliver(req, ready)
            return
        while tbu.pending and tbu.pending[0].outcome is not None:
            head = tbu.pending.popleft()
            when = max(head.outcome.ready_at, tbu.last_delivery)
            tbu.last_delivery = when
            if when != head.outcome.ready_at:
                head.outcome = replace(head.outcome, ready_at=when)
            self._deliver(head, when)

    def _deliver(self, req: _Request, when: int) -> None:
        out = req.outcome
        self.engine.schedule_at(when, lambda: req.callback(out))
