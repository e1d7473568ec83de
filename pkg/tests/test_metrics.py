import math

import pytest
from hypothesis import given, strategies as st

from hmacsim.errors import ComparisonError, UndefinedRateError
from hmacsim.metrics import (
    CSV_COLUMNS, ClassMetrics, RunMetrics, compare, emit, mean_std, pdr, pdr_or_none, read_rows,
    rows, throughput,
)
from hmacsim.simulator import SimConfig, run


def run_with(bits, protocol="hmac", nodes=10, scenario=2, seed=1, duration=1_000_000):
    m = RunMetrics(protocol, nodes, scenario, seed, duration)
    for c, b in zip(m.classes, bits):
        c.bits_delivered = b
        c.delivered = b // 8000
        c.generated = max(c.delivered, 1) * 2
    return m


def test_throughput_rate_arithmetic():
    assert throughput(ClassMetrics(bits_delivered=2_000_000), 1_000_000) == 2_000_000
    assert throughput(ClassMetrics(), 1_000_000) == 0
    m = ClassMetrics(bits_delivered=8000)
    assert throughput(m, 500_000) == 2 * throughput(m, 1_000_000)
    with pytest.raises(UndefinedRateError):
        throughput(m, 0)


def test_pdr():
    assert pdr(ClassMetrics(generated=100, delivered=80)) == 0.8
    assert pdr(ClassMetrics(generated=5, delivered=5)) == 1.0
    with pytest.raises(UndefinedRateError):
        pdr(ClassMetrics())
    assert pdr_or_none(ClassMetrics()) is None
    vec = [pdr(ClassMetrics(generated=100, delivered=d)) for d in (40, 50, 60, 70)]
    assert vec == [0.4, 0.5, 0.6, 0.7]


def test_compare_improvement():
    a = run_with([1_160_000, 0, 0, 0])
    b = run_with([1_000_000, 0, 0, 0], protocol="edca")
    assert compare(a, b).improvement_pct == pytest.approx(16.0)


def test_compare_identical_is_zero():
    a = run_with([80_000, 40_000, 16_000, 8000])
    c = compare(a, a)
    assert c.improvement_pct == 0
    assert c.class_delta_bps == [0, 0, 0, 0]


def test_compare_starvation_flags():
    hmac = run_with([80_000, 40_000, 16_000, 8000])
    edca = run_with([80_000, 40_000, 16_000, 0], protocol="edca")
    c = compare(hmac, edca)
    assert c.starved_b[3] and not c.starved_a[3]


def test_compare_mismatch_raises():
    with pytest.raises(ComparisonError):
        compare(run_with([0] * 4, nodes=10), run_with([0] * 4, nodes=20))


def test_emit_shape_and_roundtrip(tmp_path):
    runs = [run(SimConfig(node_count=6, duration=2_000_000, seed=s)) for s in (1, 2)]
    path = emit(runs, "csv", tmp_path / "runs.csv")
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 1 + 8
    parsed = read_rows(path)
    assert parsed == rows(runs)
    assert {r["seed"] for r in parsed} == {1, 2}
    jpath = emit(runs, "json", tmp_path / "runs.json")
    assert read_rows(jpath) == rows(runs)


def test_emit_io_error_names_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit([], "csv", tmp_path / "missing" / "runs.csv")


def test_rows_sorted_deterministically():
    runs = [run_with([0] * 4, protocol=p, seed=s) for p in ("hmac", "edca") for s in (2, 1)]
    keys = [(r["protocol"], r["seed"]) for r in rows(runs)]
    assert keys == sorted(keys)


def test_aggregate_never_exceeds_channel_capacity():
    m = run(SimConfig(protocol="edca", node_count=30, scenario=2, duration=2_000_000))
    assert m.aggregate_throughput() <= 2_000_000
    assert sum(c.delivered for c in m.classes) == sum(r["delivered"] for r in rows([m]))


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
def test_mean_std_matches_definition(vals):
    mean, sd = mean_std(vals)
    assert mean == pytest.approx(sum(vals) / len(vals), abs=1e-6)
    var = sum((v - sum(vals) / len(vals)) ** 2 for v in vals) / (len(vals) - 1)
    assert sd == pytest.approx(math.sqrt(var), rel=1e-6, abs=1e-6)


def test_mean_std_small_inputs():
    assert mean_std([3]) == (3.0, 0.0)
    assert all(math.isnan(v) for v in mean_std([]))
