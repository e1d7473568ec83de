"""Per-node class queues ordered by urgency.

Each node keeps four queues (UP, HP, MP, LP). In urgency mode a queue is kept
sorted ascending by ``(dui, spi, seq)`` so the head-of-line packet is the
first order statistic of the waiting DUIs. In FIFO mode (the EDCA baseline)
the key is the enqueue sequence number alone.
"""

from __future__ import annotations

from itertools import count

from .urgency import Packet

NUM_CLASSES = 4
DEFAULT_CAPACITY = 50


class ClassQueue:
    def __init__(self, class_index: int, capacity: int = DEFAULT_CAPACITY, fifo: bool = False):
        self.class_index = class_index
        self.capacity = capacity
        self.fifo = fifo
        self._keys: list[tuple] = []
        self.entries: list[Packet] = []
        self.last_insert_comparisons = 0

    def __len__(self):
        return len(self.entries)

    def __bool__(self):
        return bool(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def key(self, packet: Packet, seq: int) -> tuple:
        if self.fifo:
            return (seq,)
        return (packet.dui, packet.spi, seq)

    @property
    def head(self) -> Packet | None:
        return self.entries[0] if self.entries else None

    @property
    def head_key(self) -> tuple | None:
        return self._keys[0] if self._keys else None

    def insert(self, packet: Packet, seq: int) -> None:
        """Binary-search insert; counts ordering comparisons as it goes."""
        k = self.key(packet, seq)
        keys = self._keys
        lo, hi = 0, len(keys)
        comparisons = 0
        while lo < hi:
            mid = (lo + hi) // 2
            comparisons += 1
            if k < keys[mid]:
                hi = mid
            else:
                lo = mid + 1
        self.last_insert_comparisons = comparisons
        keys.insert(lo, k)
        self.entries.insert(lo, packet)

    def pop_head(self) -> tuple[Packet, tuple]:
        return self.entries.pop(0), self._keys.pop(0)

    def pop_tail(self) -> Packet:
        self._keys.pop()
        return self.entries.pop()

    def restore(self, packet: Packet, key: tuple) -> None:
        """Put a packet back under the key it was dequeued with."""
        keys = self._keys
        lo, hi = 0, len(keys)
        while lo < hi:
            mid = (lo + hi) // 2
            if key < keys[mid]:
                hi = mid
            else:
                lo = mid + 1
        keys.insert(lo, key)
        self.entries.insert(lo, packet)

    def remove_where(self, predicate) -> list[Packet]:
        kept_keys, kept, removed = [], [], []
        for k, p in zip(self._keys, self.entries):
            if predicate(p):
                removed.append(p)
            else:
                kept_keys.append(k)
                kept.append(p)
        if removed:
            self._keys, self.entries = kept_keys, kept
        return removed


class QueueSet:
    """The four class queues of one node plus their drop counters."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY, fifo: bool = False):
        self.queues = [ClassQueue(i, capacity, fifo) for i in range(NUM_CLASSES)]
        self.enqueue_count = [0] * NUM_CLASSES
        self.tail_drop_count = [0] * NUM_CLASSES
        self.expiry_drop_count = [0] * NUM_CLASSES
        self._seq = count()
        # last packets pushed out by tail policy, for the caller's accounting
        self.evicted: list[Packet] = []

    def __getitem__(self, class_index: int) -> ClassQueue:
        return self.queues[class_index]

    def lengths(self) -> list[int]:
        return [len(q) for q in self.queues]

    def total(self) -> int:
        return sum(len(q) for q in self.queues)


def enqueue(qs: QueueSet, packet: Packet) -> bool:
    """Insert ``packet`` into its class queue at its ordered position.

    On a full queue the incoming packet is rejected unless it sorts ahead of
    the current tail, in which case the tail is evicted (and appended to
    ``qs.evicted``). Either way one tail drop is counted for the class.
    """
    cls = packet.service_class
    q = qs.queues[cls]
    seq = next(qs._seq)
    if len(q) >= q.capacity:
        qs.tail_drop_count[cls] += 1
        if q.capacity == 0 or not q.key(packet, seq) < q._keys[-1]:
            return False
        qs.evicted.append(q.pop_tail())
    q.insert(packet, seq)
    qs.enqueue_count[cls] += 1
    return True


def queue_shares(qs: QueueSet) -> list[float]:
    """Fraction of this node's waiting packets held by each class queue."""
    lengths = qs.lengths()
    total = sum(lengths)
    if total == 0:
        return [0.0] * NUM_CLASSES
    return [n / total for n in lengths]


def select_service_queue(qs: QueueSet, eligible=None) -> int | None:
    """Index of the queue whose HOL packet has the lowest DUI.

    Ties on DUI go to the lower SPI of the HOL packet, then to the lower
    class index. ``eligible`` optionally restricts the candidate classes.
    """
    best = None
    best_key = None
    for i, q in enumerate(qs.queues):
        if not q.entries or (eligible is not None and not eligible[i]):
            continue
        hol = q.entries[0]
        k = (hol.dui, hol.spi, i)
        if best_key is None or k < best_key:
            best, best_key = i, k
    return best


def burst_size(txop_limit: float, per_packet_time: float, sifs: float = 0) -> int:
    """Frames that fit in a TXOP; a positive grant always admits one frame."""
    if txop_limit <= 0:
        return 0
    return max(1, int((txop_limit + sifs) // per_packet_time))


def dequeue_burst(qs: QueueSet, class_index: int, txop_limit: float,
                  per_packet_time: float, sifs: float = 0) -> list[Packet]:
    """Remove and return the HOL packets that fit in one TXOP.

    A frame fits while ``(count + 1) * per_packet_time <= txop_limit + sifs``;
    the allowance covers the SIFS that TXOP limits are computed net of.
    """
    if txop_limit < 0:
        raise ValueError("txop_limit must be non-negative")
    q = qs.queues[class_index]
    n = min(len(q), burst_size(txop_limit, per_packet_time, sifs))
    out = q.entries[:n]
    del q.entries[:n]
    del q._keys[:n]
    return out


def drop_expired(qs: QueueSet, now: int) -> list[int]:
    """Remove packets whose lifetime would be exhausted by ``now``."""
    counts = [0] * NUM_CLASSES
    for i, q in enumerate(qs.queues):
        removed = q.remove_where(
            lambda p: p.cumulative_delay + (now - p.last_arrival_time) >= p.lifetime
        )
        counts[i] = len(removed)
        qs.expiry_drop_count[i] += len(removed)
    return counts


def expired_packets(qs: QueueSet, now: int) -> list[list[Packet]]:
    """Like :func:`drop_expired` but hands back the removed packets."""
    out = []
    for i, q in enumerate(qs.queues):
        removed = q.remove_where(
            lambda p: p.cumulative_delay + (now - p.last_arrival_time) >= p.lifetime
        )
        qs.expiry_drop_count[i] += len(removed)
        out.append(removed)
    return out
