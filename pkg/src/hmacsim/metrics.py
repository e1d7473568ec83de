"""Per-class run counters, derived metrics, comparison and serialization."""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ComparisonError, UndefinedRateError
from .urgency import CLASS_NAMES

TICKS_PER_SECOND = 1_000_000
STARVATION_SHARE = 0.01

CSV_COLUMNS = (
    "protocol", "scenario", "node_count", "seed", "class",
    "generated", "delivered", "dropped_expired", "dropped_retry", "dropped_tail",
    "bits_delivered", "throughput_bps", "pdr", "collisions", "transmissions",
    "a_col", "mean_delay_ticks",
)

_INT_COLUMNS = {"scenario", "node_count", "seed", "generated", "delivered",
                "dropped_expired", "dropped_retry", "dropped_tail", "bits_delivered",
                "collisions", "transmissions"}


@dataclass
class ClassMetrics:
    generated: int = 0
    delivered: int = 0
    dropped_expired: int = 0
    dropped_retry: int = 0
    dropped_tail: int = 0
    bits_delivered: int = 0
    collisions: int = 0
    transmissions: int = 0
    sum_end_to_end_delay: int = 0
    in_flight: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_expired + self.dropped_retry + self.dropped_tail

    def mean_delay(self) -> float | None:
        if self.delivered == 0:
            return None
        return self.sum_end_to_end_delay / self.delivered

    def conserved(self) -> bool:
        return self.generated == self.delivered + self.dropped + self.in_flight


@dataclass
class RunMetrics:
    protocol: str
    node_count: int
    scenario: int
    seed: int
    duration: int
    classes: list[ClassMetrics] = field(default_factory=lambda: [ClassMetrics() for _ in CLASS_NAMES])
    measured_a_col: float = 0.0
    scenario_target_met: bool = True

    @property
    def wall_duration(self) -> int:
        return self.duration

    def class_throughputs(self) -> list[float]:
        if self.duration <= 0:
            return [0.0] * len(self.classes)
        return [throughput(m, self.duration) for m in self.classes]

    def aggregate_throughput(self) -> float:
        return sum(self.class_throughputs())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = [asdict(c) for c in self.classes]
        return d


def throughput(m: ClassMetrics, duration: int) -> float:
    """Delivered bits per second over ``duration`` ticks."""
    if duration <= 0:
        raise UndefinedRateError("throughput over a zero-length interval")
    return m.bits_delivered * TICKS_PER_SECOND / duration


def pdr(m: ClassMetrics) -> float:
    if m.generated == 0:
        raise UndefinedRateError("packet delivery ratio with nothing generated")
    return m.delivered / m.generated


def pdr_or_none(m: ClassMetrics) -> float | None:
    return None if m.generated == 0 else m.delivered / m.generated


@dataclass
class Comparison:
    """How run ``a`` fares against run ``b`` (typically H-MAC vs EDCA)."""

    scenario: int
    node_count: int
    aggregate_a: float
    aggregate_b: float
    improvement_pct: float | None
    class_delta_bps: list[float]
    starved_a: list[bool]
    starved_b: list[bool]


def starved_classes(tputs, share: float = STARVATION_SHARE) -> list[bool]:
    total = sum(tputs)
    if total <= 0:
        return [True] * len(tputs)
    return [t < share * total for t in tputs]


def compare(a: RunMetrics, b: RunMetrics) -> Comparison:
    if a.node_count != b.node_count or a.scenario != b.scenario:
        raise ComparisonError(
            f"cannot compare runs with (nodes, scenario) = "
            f"({a.node_count}, {a.scenario}) and ({b.node_count}, {b.scenario})"
        )
    ta, tb = a.class_throughputs(), b.class_throughputs()
    return compare_throughputs(ta, tb, a.scenario, a.node_count)


def compare_throughputs(ta, tb, scenario: int, node_count: int) -> Comparison:
    agg_a, agg_b = sum(ta), sum(tb)
    if agg_b > 0:
        pct = (agg_a / agg_b - 1.0) * 100.0
    else:
        pct = 0.0 if agg_a == 0 else None
    return Comparison(
        scenario=scenario,
        node_count=node_count,
        aggregate_a=agg_a,
        aggregate_b=agg_b,
        improvement_pct=pct,
        class_delta_bps=[x - y for x, y in zip(ta, tb)],
        starved_a=starved_classes(ta),
        starved_b=starved_classes(tb),
    )


def rows(metrics) -> list[dict]:
    """Flatten runs into per-class rows in deterministic order."""
    out = []
    for run in sorted(metrics, key=lambda r: (r.protocol, r.scenario, r.node_count, r.seed)):
        tputs = run.class_throughputs()
        for i, (name, m) in enumerate(zip(CLASS_NAMES, run.classes)):
            out.append({
                "protocol": run.protocol,
                "scenario": run.scenario,
                "node_count": run.node_count,
                "seed": run.seed,
                "class": name,
                "generated": m.generated,
                "delivered": m.delivered,
                "dropped_expired": m.dropped_expired,
                "dropped_retry": m.dropped_retry,
                "dropped_tail": m.dropped_tail,
                "bits_delivered": m.bits_delivered,
                "throughput_bps": tputs[i],
                "pdr": pdr_or_none(m),
                "collisions": m.collisions,
                "transmissions": m.transmissions,
                "a_col": run.measured_a_col,
                "mean_delay_ticks": m.mean_delay(),
            })
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit(metrics, fmt: str, path) -> Path:
    """Write per-class rows for ``metrics`` as CSV or JSON."""
    path = Path(path)
    data = rows(metrics)
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for row in data:
                    writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        elif fmt == "json":
            with path.open("w") as fh:
                json.dump(data, fh, indent=1)
                fh.write("\n")
        else:
            raise ValueError(f"unknown output format {fmt!r}")
    except OSError as exc:
        raise OSError(f"failed writing metrics to {path}: {exc}") from exc
    return path


def _parse_cell(column: str, text: str):
    if text == "":
        return None
    if column in ("protocol", "class"):
        return text
    if column in _INT_COLUMNS:
        return int(text)
    return float(text)


def read_rows(path) -> list[dict]:
    """Parse a file written by :func:`emit` back into typed rows."""
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [{c: _parse_cell(c, row[c]) for c in reader.fieldnames} for row in reader]


def mean_std(values) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (0 for one value)."""
    values = list(values)
    if not values:
        return math.nan, math.nan
    if len(values) < 2:
        return float(values[0]), 0.0
    return statistics.fmean(values), statistics.stdev(values)
