"""StreamID-tagged translation caches (micro-TLB, macro-TLB, walk cache)."""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

PAGE_SIZE = 4096
PAGE_SHIFT = 12
MAX_VPN = 2**52 - 1
MAX_STREAM = 2**16 - 1


class Access(enum.Enum):
    READ = "R"
    WRITE = "W"


class Replacement(enum.Enum):
    LRU = "lru"
    FIFO = "fifo"
    ROUND_ROBIN = "round_robin"


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


Key = tuple[int, int]  # (stream, vpn)


def vpn_of(va: int) -> int:
    return va >> PAGE_SHIFT


def modulo_index(stream: int, vpn: int, sets: int) -> int:
    return vpn % sets


def stream_xor_index(stream: int, vpn: int, sets: int) -> int:
    return (vpn ^ (stream * 0x9E37)) % sets


INDEX_FUNCTIONS: dict[str, Callable[[int, int, int], int]] = {
    "modulo": modulo_index,
    "stream_xor": stream_xor_index,
}


@dataclass(frozen=True)
class TlbConfig:
    depth: int
    associativity: Optional[int] = None  # None means fully associative
    replacement: Replacement = Replacement.LRU
    index: str = "modulo"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        ways = self.ways
        if ways < 1 or self.depth % ways:
            raise ValueError(f"associativity {ways} does not divide depth {self.depth}")
        if self.index not in INDEX_FUNCTIONS:
            raise ValueError(f"unknown index function {self.index!r}")
        if isinstance(self.replacement, str):
            object.__setattr__(self, "replacement", Replacement(self.replacement))

    @property
    def ways(self) -> int:
        return self.depth if self.associativity is None else self.associativity

    @property
    def sets(self) -> int:
        return self.depth // self.ways

    @property
    def fully_associative(self) -> bool:
        return self.ways == self.depth


@dataclass
class TlbEntry:
    stream: int
    vpn: int
    ppn: int
    valid: bool = True
    lru_stamp: int = 0


@dataclass
class TlbStats:
    lookups_read: int = 0
    lookups_write: int = 0
    hits: int = 0
    allocs_read: int = 0
    allocs_write: int = 0
    evictions: int = 0
    invalidations: int = 0

    @property
    def lookups(self) -> int:
        return self.lookups_read + self.lookups_write

    @property
    def allocs(self) -> int:
        return self.allocs_read + self.allocs_write

    @property
    def misses(self) -> int:
        return self.lookups - self.hits


def _check_key(stream: int, vpn: int) -> None:
    if not 0 <= stream <= MAX_STREAM:
        raise ValueError(f"stream id {stream} outside 16 bits")
    if not 0 <= vpn <= MAX_VPN:
        raise ValueError(f"vpn {vpn:#x} outside 52 bits")


class TranslationCache:
    """Set-associative cache of (stream, vpn) -> ppn entries.

    Each set is an ``OrderedDict`` kept in replacement order: the first item is
    the next LRU/FIFO victim; LRU moves an entry to the end on every hit.
    Round-robin keeps a way array per set and a rotating victim pointer, so it
    differs from FIFO once invalidations leave holes.
    """

    def __init__(self, config: TlbConfig, name: str = "tlb"):
        self.config = config
        self.name = name
        self._sets: list[OrderedDict[Key, TlbEntry]] = [OrderedDict() for _ in range(config.sets)]
        self._index = INDEX_FUNCTIONS[config.index]
        self._rr = config.replacement is Replacement.ROUND_ROBIN
        self._slots: list[list[Optional[Key]]] = (
            [[None] * config.ways for _ in range(config.sets)] if self._rr else []
        )
        self._pointers = [0] * config.sets if self._rr else []
        self._stamp = 0
        self.stats = TlbStats()

    def _set_no(self, stream: int, vpn: int) -> int:
        if self.config.sets == 1:
            return 0
        return self._index(stream, vpn, self.config.sets)

    def _set_for(self, stream: int, vpn: int) -> OrderedDict[Key, TlbEntry]:
        return self._sets[self._set_no(stream, vpn)]

    def __len__(self) -> int:
        return sum(len(s) for s in self._sets)

    def __contains__(self, key: Key) -> bool:
        return key in self._set_for(*key)

    def entries(self) -> list[TlbEntry]:
        return [e for s in self._sets for e in s.values()]

    def set_occupancy(self) -> list[int]:
        return [len(s) for s in self._sets]

    def lookup(self, stream: int, vpn: int, rw: Access = Access.READ) -> Optional[int]:
        """Return the cached ppn on a hit, ``None`` on a miss."""
        if rw is Access.READ:
            self.stats.lookups_read += 1
        else:
            self.stats.lookups_write += 1
        s = self._set_for(stream, vpn)
        entry = s.get((stream, vpn))
        if entry is None:
            return None
        self.stats.hits += 1
        if self.config.replacement is Replacement.LRU:
            s.move_to_end((stream, vpn))
            self._stamp += 1
            entry.lru_stamp = self._stamp
        return entry.ppn

    def allocate(self, stream: int, vpn: int, ppn: int, rw: Access = Access.READ) -> Optional[TlbEntry]:
        _check_key(stream, vpn)
        key = (stream, vpn)
        n = self._set_no(stream, vpn)
        s = self._sets[n]
        if key in s:
            raise ContractError(f"{self.name}: entry for stream {stream} vpn {vpn:#x} already present")
        victim = None
        if self._rr:
            slots = self._slots[n]
            try:
                way = slots.index(None)
            except ValueError:
                way = self._pointers[n]
                self._pointers[n] = (way + 1) % self.config.ways
                victim = s.pop(slots[way])
            slots[way] = key
        elif len(s) >= self.config.ways:
            _, victim = s.popitem(last=False)
        if victim is not None:
            victim.valid = False
            self.stats.evictions += 1
        self._stamp += 1
        s[key] = TlbEntry(stream, vpn, ppn, True, self._stamp)
        if rw is Access.READ:
            self.stats.allocs_read += 1
        else:
            self.stats.allocs_write += 1
        return victim

    def invalidate(self, stream: Optional[int] = None) -> int:
        """Drop every entry (``stream=None``) or only those of one stream."""
        count = 0
        for n, s in enumerate(self._sets):
            doomed = [k for k in s if stream is None or k[0] == stream]
            for k in doomed:
                s.pop(k).valid = False
                if self._rr:
                    slots = self._slots[n]
                    slots[slots.index(k)] = None
            count += len(doomed)
        self.stats.invalidations += count
        return count

    def reset_stats(self) -> None:
        self.stats = TlbStats()


@dataclass
class ReferenceResult:
    hits: list[bool] = field(default_factory=list)
    victims: list[Optional[Key]] = field(default_factory=list)


def reference_lookup(
    trace: Iterable[tuple[int, int, Access]],
    depth: int,
    associativity: Optional[int] = None,
    index: str = "modulo",
) -> ReferenceResult:
    """Brute-force LRU oracle: unordered entry lists with explicit timestamps.

    Every miss allocates. Returns the per-access hit flags and the evicted key
    (or ``None``) for every access.
    """
    ways = depth if associativity is None else associativity
    sets = depth // ways
    index_fn = INDEX_FUNCTIONS[index]
    # each set: list of [stream, vpn, last_used]
    table: list[list[list[int]]] = [[] for _ in range(sets)]
    out = ReferenceResult()
    clock = 0
    for stream, vpn, _rw in trace:
        clock += 1
        entries = table[index_fn(stream, vpn, sets) if sets > 1 else 0]
        found = None
        for e in entries:
            if e[0] == stream and e[1] == vpn:
                found = e
        if found is not None:
            found[2] = clock
            out.hits.append(True)
            out.victims.append(None)
            continue
        out.hits.append(False)
        victim = None
        if len(entries) >= ways:
            oldest = entries[0]
            for e in entries:
                if e[2] < oldest[2]:
                    oldest = e
            entries.remove(oldest)
            victim = (oldest[0], oldest[1])
        entries.append([stream, vpn, clock])
        out.victims.append(victim)
    return out


def replay(cache: TranslationCache, trace: Iterable[tuple[int, int, Access]]) -> ReferenceResult:
    """Drive an optimized cache with lookup-then-allocate-on-miss semantics."""
    out = ReferenceResult()
    for stream, vpn, rw in trace:
        if cache.lookup(stream, vpn, rw) is not None:
            out.hits.append(True)
            out.victims.append(None)
            continue
        victim = cache.allocate(stream, vpn, vpn, rw)
        out.hits.append(False)
        out.victims.append(None if victim is None else (victim.stream, victim.vpn))
    return out
