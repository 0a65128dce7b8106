"""Per-table page cache with pluggable FIFO, LRU, and LFU replacement.

All record reads flow through :class:`CacheManager`; writes hit storage first
and are then mirrored into any resident page (write-through), so a cached
read can never observe stale bytes. Index data is not cached here, indexes
live fully in memory.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

from .errors import UnknownTableError
from .storage import NoSuchRecord, PageOutOfRange, RecordSlot, Table

POLICIES = ("fifo", "lru", "lfu")


@dataclass(frozen=True)
class CacheConfig:
    """Per-table cache parameters, fixed at open time."""

    page_size: int = 64
    capacity: int = 128
    policy: str = "lru"

    def __post_init__(self) -> None:
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(
                f"unknown policy {self.policy!r}, expected one of {POLICIES}")


@dataclass
class Page:
    """A resident page: the decoded slots of one contiguous file region."""

    table: str
    page_no: int
    slots: list[RecordSlot]


class _FifoState:
    """Evicts in insertion order; hits never reorder."""

    def __init__(self) -> None:
        self._order: OrderedDict[int, None] = OrderedDict()

    def inserted(self, page_no: int) -> None:
        self._order[page_no] = None

    def accessed(self, page_no: int) -> None:
        pass

    def victim(self) -> int:
        return next(iter(self._order))

    def forgotten(self, page_no: int) -> None:
        del self._order[page_no]


class _LruState(_FifoState):
    """Evicts the least recently accessed page."""

    def accessed(self, page_no: int) -> None:
        self._order.move_to_end(page_no)


class _LfuState:
    """Evicts the lowest-frequency page; ties fall back to insertion order."""

    def __init__(self) -> None:
        self._freq: dict[int, int] = {}
        self._seq: dict[int, int] = {}
        self._counter = 0

    def inserted(self, page_no: int) -> None:
        # the filling access itself counts toward the frequency
        self._freq[page_no] = 1
        self._seq[page_no] = self._counter
        self._counter += 1

    def accessed(self, page_no: int) -> None:
        self._freq[page_no] += 1

    def victim(self) -> int:
        return min(self._freq, key=lambda p: (self._freq[p], self._seq[p]))

    def forgotten(self, page_no: int) -> None:
        del self._freq[page_no]
        del self._seq[page_no]


_POLICY_STATES = {"fifo": _FifoState, "lru": _LruState, "lfu": _LfuState}


class _TableCache:
    __slots__ = ("table", "config", "pages", "policy", "hits", "misses",
                 "evictions", "lock")

    def __init__(self, table: Table, config: CacheConfig) -> None:
        self.table = table
        self.config = config
        self.pages: dict[int, Page] = {}
        self.policy = _POLICY_STATES[config.policy]()
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self.lock = threading.Lock()


class CacheManager:
    """One independent cache per open table.

    Each table gets the manager's default :class:`CacheConfig` unless
    ``open_table`` is handed an override. The per-table lock makes the
    stats/recency bookkeeping safe under concurrent shared readers; page
    replacement is atomic under it, so readers never see a torn page.
    """

    def __init__(self, config: CacheConfig | None = None) -> None:
        self._default = config if config is not None else CacheConfig()
        self._caches: dict[str, _TableCache] = {}
        self._lock = threading.Lock()

    def open_table(self, table: Table, config: CacheConfig | None = None) -> None:
        with self._lock:
            self._caches[table.name] = _TableCache(table, config or self._default)

    def close_table(self, name: str) -> None:
        with self._lock:
            self._caches.pop(name, None)

    def _entry(self, name: str) -> _TableCache:
        with self._lock:
            entry = self._caches.get(name)
        if entry is None:
            raise UnknownTableError(f"no cache for table {name!r}")
        return entry

    def get_record(self, name: str, record_number: int) -> RecordSlot:
        """Return the slot for a record, filling its page on a miss.

        A failed lookup (record beyond the end of the table) changes neither
        the stats nor the resident set.
        """
        if record_number < 0:
            raise NoSuchRecord(f"negative record number {record_number}")
        entry = self._entry(name)
        page_no, offset = divmod(record_number, entry.config.page_size)
        with entry.lock:
            page = entry.pages.get(page_no)
            if page is not None:
                if offset >= len(page.slots):
                    raise NoSuchRecord(
                        f"table {name}: no record {record_number}")
                entry.hits += 1
                entry.policy.accessed(page_no)
                return page.slots[offset]
            try:
                slots = entry.table.read_page(page_no, entry.config.page_size)
            except PageOutOfRange:
                raise NoSuchRecord(
                    f"table {name}: no record {record_number}") from None
            if offset >= len(slots):
                raise NoSuchRecord(f"table {name}: no record {record_number}")
            entry.misses += 1
            if len(entry.pages) >= entry.config.capacity:
                victim = entry.policy.victim()
                entry.policy.forgotten(victim)
                del entry.pages[victim]
                entry.evictions += 1
            entry.pages[page_no] = Page(name, page_no, slots)
            entry.policy.inserted(page_no)
            return slots[offset]

    def apply_write(self, name: str, record_number: int, slot: RecordSlot) -> None:
        """Mirror a durable storage write into the resident page, if any.

        Overwrites and deletes replace the slot in place; an append extends
        the resident final page (the modulo arithmetic guarantees it has
        room). Writes leave stats and replacement state untouched.
        """
        entry = self._entry(name)
        page_no, offset = divmod(record_number, entry.config.page_size)
        with entry.lock:
            page = entry.pages.get(page_no)
            if page is None:
                return
            if offset < len(page.slots):
                page.slots[offset] = slot
            elif offset == len(page.slots):
                page.slots.append(slot)
            # a larger offset would mean a skipped append, which storage
            # cannot produce; such a write is ignored

    def stats(self, name: str) -> dict[str, int]:
        entry = self._entry(name)
        with entry.lock:
            return {"hits": entry.hits, "misses": entry.misses,
                    "evictions": entry.evictions}

    def resident_pages(self, name: str) -> list[int]:
        entry = self._entry(name)
        with entry.lock:
            return sorted(entry.pages)
