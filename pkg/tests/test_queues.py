import math
import random

import pytest
from hypothesis import given, strategies as st

from hmacsim.queues import (
    ClassQueue, QueueSet, burst_size, dequeue_burst, drop_expired, enqueue, queue_shares,
    select_service_queue,
)
from hmacsim.urgency import Packet

_ids = iter(range(10**9))


def pkt(dui, spi=1, qf=0, lt=1000, t0=0):
    p = Packet(id=next(_ids), spi=spi, qf=qf, lifetime=lt, total_hops=5, generation_time=t0)
    p.dui = dui
    return p


def duis(q):
    return [p.dui for p in q]


def test_ordered_insert():
    qs = QueueSet()
    for d in (1.0, 3.0, 2.0):
        enqueue(qs, pkt(d, spi=2))
    assert duis(qs[2]) == [1.0, 2.0, 3.0]


def test_equal_dui_tie_goes_to_lower_spi():
    # urgent-flagged packets share queue 0 whatever their SPI
    qs = QueueSet()
    mp = pkt(2.0, spi=2, qf=1)
    hp = pkt(2.0, spi=1, qf=1)
    enqueue(qs, mp)
    enqueue(qs, hp)
    assert list(qs[0]) == [hp, mp]


def test_equal_key_keeps_enqueue_order():
    qs = QueueSet()
    a, b = pkt(1.0), pkt(1.0)
    enqueue(qs, a)
    enqueue(qs, b)
    assert list(qs[1]) == [a, b]


def test_full_queue_rejects_worse_packet():
    qs = QueueSet(capacity=2)
    enqueue(qs, pkt(1.0))
    enqueue(qs, pkt(2.0))
    assert enqueue(qs, pkt(5.0)) is False
    assert duis(qs[1]) == [1.0, 2.0]
    assert qs.tail_drop_count[1] == 1


def test_full_queue_evicts_tail_for_more_urgent_packet():
    qs = QueueSet(capacity=2)
    enqueue(qs, pkt(1.0))
    tail = pkt(3.0)
    enqueue(qs, tail)
    assert enqueue(qs, pkt(2.0)) is True
    assert duis(qs[1]) == [1.0, 2.0]
    assert qs.evicted == [tail]
    assert qs.tail_drop_count[1] == 1


def test_fifo_mode_ignores_dui():
    qs = QueueSet(fifo=True)
    for d in (3.0, 1.0, 2.0):
        enqueue(qs, pkt(d))
    assert duis(qs[1]) == [3.0, 1.0, 2.0]


@pytest.mark.parametrize("lengths,expected", [
    ((10, 20, 30, 40), [0.1, 0.2, 0.3, 0.4]),
    ((0, 0, 0, 7), [0, 0, 0, 1.0]),
    ((0, 0, 0, 0), [0, 0, 0, 0]),
])
def test_queue_shares(lengths, expected):
    qs = QueueSet(capacity=100)
    for cls, n in enumerate(lengths):
        for _ in range(n):
            enqueue(qs, pkt(1.0, spi=cls, qf=int(cls == 0)))
    assert queue_shares(qs) == pytest.approx(expected)


def test_select_min_hol_dui():
    qs = QueueSet()
    enqueue(qs, pkt(3.0, spi=0, qf=1))
    enqueue(qs, pkt(1.5, spi=1))
    enqueue(qs, pkt(2.0, spi=3))
    assert select_service_queue(qs) == 1


def test_select_tie_goes_to_lowest_spi():
    qs = QueueSet()
    enqueue(qs, pkt(2.0, spi=0, qf=1))
    enqueue(qs, pkt(2.0, spi=1))
    assert select_service_queue(qs) == 0


def test_select_empty_and_eligibility():
    qs = QueueSet()
    assert select_service_queue(qs) is None
    enqueue(qs, pkt(2.0, spi=0, qf=1))
    enqueue(qs, pkt(1.0, spi=3))
    assert select_service_queue(qs, [True, True, True, False]) == 0
    assert select_service_queue(qs, [False] * 4) is None


def test_dequeue_burst_three_of_five():
    qs = QueueSet()
    for d in (5.0, 1.0, 4.0, 2.0, 3.0):
        enqueue(qs, pkt(d))
    out = dequeue_burst(qs, 1, txop_limit=3 * 100 - 10, per_packet_time=100, sifs=10)
    assert [p.dui for p in out] == [1.0, 2.0, 3.0]
    assert len(qs[1]) == 2


def test_dequeue_burst_empty_and_minimum_grant():
    qs = QueueSet()
    assert dequeue_burst(qs, 1, 1000, 100) == []
    enqueue(qs, pkt(1.0))
    enqueue(qs, pkt(2.0))
    assert len(dequeue_burst(qs, 1, txop_limit=50, per_packet_time=100)) == 1


def test_dequeue_burst_rejects_negative_limit():
    with pytest.raises(ValueError):
        dequeue_burst(QueueSet(), 1, -1, 100)


def test_burst_size_edges():
    assert burst_size(0, 100) == 0
    assert burst_size(4076 - 10, 4076, 10) == 1
    assert burst_size(6 * 4076 - 10, 4076, 10) == 6


def test_drop_expired_counts():
    qs = QueueSet()
    enqueue(qs, pkt(1.0, spi=3, lt=5, t0=0))
    enqueue(qs, pkt(1.0, spi=2, lt=50, t0=0))
    assert drop_expired(qs, now=3) == [0, 0, 0, 0]
    assert drop_expired(qs, now=6) == [0, 0, 0, 1]
    assert qs.expiry_drop_count == [0, 0, 0, 1]


def test_drop_expired_two_urgent():
    qs = QueueSet()
    enqueue(qs, pkt(1.0, spi=2, qf=1, lt=4))
    enqueue(qs, pkt(2.0, spi=1, qf=1, lt=4))
    enqueue(qs, pkt(3.0, spi=0, qf=1, lt=400))
    enqueue(qs, pkt(3.0, spi=1, lt=400))
    assert drop_expired(qs, now=10) == [2, 0, 0, 0]
    assert len(qs[0]) == 1


# property checks -----------------------------------------------------------

entries = st.lists(st.tuples(st.integers(0, 20), st.integers(0, 3)), max_size=60)


@given(entries)
def test_ordered_insert_matches_sort_oracle(items):
    q = ClassQueue(0, capacity=1000)
    for seq, (d, spi) in enumerate(items):
        q.insert(pkt(d / 4, spi=spi), seq)
    expected = sorted(((d / 4, spi, seq) for seq, (d, spi) in enumerate(items)))
    assert [(p.dui, p.spi) for p in q] == [(d, s) for d, s, _ in expected]


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=200))
def test_insert_comparisons_logarithmic(values):
    q = ClassQueue(0, capacity=10_000)
    for seq, v in enumerate(values):
        n = len(q)
        q.insert(pkt(v), seq)
        bound = math.ceil(math.log2(n)) + 1 if n > 1 else 1
        assert q.last_insert_comparisons <= bound


@given(st.lists(st.integers(0, 3), min_size=1, max_size=40))
def test_shares_sum_to_one(classes):
    qs = QueueSet(capacity=100)
    for c in classes:
        enqueue(qs, pkt(1.0, spi=c, qf=int(c == 0)))
    x = queue_shares(qs)
    assert sum(x) == pytest.approx(1.0)
    assert all(0 <= v <= 1 for v in x)


@given(st.lists(st.tuples(st.integers(0, 80), st.integers(0, 3)), min_size=1, max_size=30))
def test_select_invariant_under_monotone_transform(items):
    a, b = QueueSet(capacity=100), QueueSet(capacity=100)
    for n, c in items:
        d = n / 8
        enqueue(a, pkt(d, spi=c, qf=int(c == 0)))
        enqueue(b, pkt(math.exp(d) * 3 + 1, spi=c, qf=int(c == 0)))
    assert select_service_queue(a) == select_service_queue(b)


def test_hol_is_minimum_of_random_fill():
    rng = random.Random(5)
    for _ in range(200):
        qs = QueueSet()
        vals = [rng.random() for _ in range(rng.randint(1, 12))]
        for v in vals:
            c = rng.randrange(4)
            enqueue(qs, pkt(v, spi=c, qf=int(c == 0)))
        head = qs[select_service_queue(qs)].head
        assert head.dui == min(vals)
