from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hmacsim.errors import MonotonicClockError, NoThresholdError, OvertraversalError
from hmacsim.urgency import (
    Packet, compute_dui, delay_threshold, is_expired, record_hop_arrival, success_probability,
)


def make(lt=20, h=5, cd=0, traversed=0, ok=0, t0=0, **kw):
    p = Packet(id=1, spi=kw.pop("spi", 1), qf=kw.pop("qf", 0), lifetime=lt, total_hops=h,
               generation_time=t0, **kw)
    p.cumulative_delay = cd
    p.hops_traversed = traversed
    p.hop_success_count = ok
    return p


def test_local_delay_added_to_cumulative():
    p = make(lt=1000, h=5, t0=100)
    record_hop_arrival(p, 106)
    assert p.cumulative_delay == 6
    assert p.hops_traversed == 1
    assert p.remaining_hops == 4
    assert p.last_arrival_time == 106


def test_first_hop_from_generation_time():
    p = make(lt=1000, h=3, t0=50)
    record_hop_arrival(p, 54)
    assert (p.cumulative_delay, p.hops_traversed) == (4, 1)


def test_hop_success_judged_against_previous_threshold():
    # LT=20, H_i=5 -> tau=4.0 when the hop begins
    late = make(lt=20, h=5)
    record_hop_arrival(late, 6)
    assert late.hop_success_count == 0
    early = make(lt=20, h=5)
    record_hop_arrival(early, 3)
    assert early.hop_success_count == 1


def test_hop_exactly_on_threshold_counts_as_success():
    p = make(lt=20, h=5)
    record_hop_arrival(p, 4)
    assert p.hop_success_count == 1


@pytest.mark.parametrize("lt,cd,hops_left,expected", [
    (20, 0, 5, 4.0),
    (20, 6, 3, 14 / 3),
    (20, 20, 2, 0.0),
])
def test_delay_threshold(lt, cd, hops_left, expected):
    p = make(lt=lt, h=hops_left, cd=cd)
    assert delay_threshold(p) == pytest.approx(expected)


def test_threshold_can_go_negative():
    p = make(lt=20, h=2, cd=25)
    assert delay_threshold(p) == pytest.approx(-2.5)


def test_threshold_at_destination_raises():
    p = make(h=3, traversed=3)
    with pytest.raises(NoThresholdError):
        delay_threshold(p)


@pytest.mark.parametrize("traversed,ok,expected", [(0, 0, 1.0), (2, 1, 0.5), (3, 3, 1.0)])
def test_success_probability(traversed, ok, expected):
    assert success_probability(make(h=5, traversed=traversed, ok=ok)) == expected


def test_dui_examples():
    p = make(lt=20, h=5, cd=6, traversed=2, ok=1)  # tau = 14/3, p = 1/2
    assert compute_dui(p) == pytest.approx(7 / 3)
    assert p.dui == pytest.approx(7 / 3)
    assert compute_dui(make(lt=20, h=5, cd=6, traversed=2, ok=0)) == 0.0
    assert compute_dui(make(lt=20, h=5)) == pytest.approx(4.0)


@pytest.mark.parametrize("cd,lt,expired", [(19.9, 20, False), (20, 20, True), (25, 20, True)])
def test_is_expired(cd, lt, expired):
    assert is_expired(make(lt=lt, cd=cd)) is expired


def test_arrival_before_last_raises():
    p = make(lt=100, h=3, t0=10)
    with pytest.raises(MonotonicClockError):
        record_hop_arrival(p, 9)


def test_overtraversal_raises():
    p = make(lt=100, h=1)
    record_hop_arrival(p, 1)
    with pytest.raises(OvertraversalError):
        record_hop_arrival(p, 2)


def test_destination_keeps_last_dui():
    p = make(lt=100, h=1)
    compute_dui(p)
    before = p.dui
    record_hop_arrival(p, 7)
    assert p.dui == before
    assert p.remaining_hops == 0


def test_urgent_flag_routes_to_class_zero():
    assert make(spi=3, qf=1).service_class == 0
    assert make(spi=2, qf=0).service_class == 2


# property checks -----------------------------------------------------------

gaps = st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=10)


@given(gaps)
def test_cumulative_delay_is_sum_of_local_delays(ds):
    p = make(lt=10_000, h=len(ds))
    t = 0
    for d in ds:
        t += d
        record_hop_arrival(p, t)
    assert p.cumulative_delay == sum(ds)
    assert 0 <= p.hop_success_count <= p.hops_traversed == len(ds)


@given(gaps)
def test_success_count_matches_fraction_oracle(ds):
    # independent recomputation with exact rationals
    lt, h = 200, len(ds)
    p = make(lt=lt, h=h)
    cd, ok, t = 0, 0, 0
    for i, d in enumerate(ds):
        tau = Fraction(lt - cd, h - i)
        if d <= tau:
            ok += 1
        cd += d
        t += d
        record_hop_arrival(p, t)
    assert p.hop_success_count == ok


@given(st.integers(2, 20), st.integers(1, 19), st.data())
def test_dui_strictly_increasing_in_success_ratio(h, traversed, data):
    traversed = min(traversed, h - 1)
    lt = h + data.draw(st.integers(1, 50))
    cd = data.draw(st.integers(0, lt - 1))
    a = data.draw(st.integers(0, traversed))
    b = data.draw(st.integers(0, traversed))
    if a == b:
        return
    lo, hi = sorted((a, b))
    d_lo = compute_dui(make(lt=lt, h=h, cd=cd, traversed=traversed, ok=lo))
    d_hi = compute_dui(make(lt=lt, h=h, cd=cd, traversed=traversed, ok=hi))
    assert d_lo < d_hi


@given(st.integers(1, 20), st.integers(0, 40), st.integers(0, 20), st.data())
def test_dui_bounded_by_lifetime_over_hops(h, lt_extra, traversed, data):
    traversed = min(traversed, h - 1) if h > 1 else 0
    lt = h + lt_extra
    cd = data.draw(st.integers(0, lt))
    ok = data.draw(st.integers(0, traversed))
    p = make(lt=lt, h=h, cd=cd, traversed=traversed, ok=ok)
    dui = compute_dui(p)
    assert dui >= 0
    assert dui <= lt / p.remaining_hops + 1e-12


@given(st.integers(2, 30), st.integers(0, 500), st.integers(1, 1000))
def test_threshold_recurrence_when_hop_uses_exact_budget(h, cd, slack):
    lt = Fraction(cd + slack)
    tau = (lt - cd) / h
    assert (lt - cd - tau) / (h - 1) == tau
