"""Command-line experiment driver.

Runs every (protocol, scenario, node count, seed) cell of a plan and writes
``runs.csv`` (or ``runs.json``), ``summary.csv`` with seed means and sample
standard deviations, and ``comparison.csv`` with H-MAC against EDCA per
(scenario, node count).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigurationError
from .metrics import compare_throughputs, emit, mean_std, pdr_or_none
from .simulator import SimConfig, run
from .simulator.config import PROTOCOLS, SCENARIOS, apply_overrides
from .urgency import CLASS_NAMES

log = logging.getLogger("hmacsim")

DEFAULT_NODES = (5, 10, 25, 50, 100)
DEFAULT_SEEDS = 5

SUMMARY_COLUMNS = (
    "protocol", "scenario", "node_count", "class", "seeds",
    "throughput_bps_mean", "throughput_bps_std", "pdr_mean", "pdr_std",
    "a_col_mean", "a_col_std", "note",
)
COMPARISON_COLUMNS = (
    "scenario", "node_count", "hmac_aggregate_bps", "edca_aggregate_bps", "improvement_pct",
    *[f"delta_{c}_bps" for c in CLASS_NAMES],
    "hmac_starved", "edca_starved",
)
TARGET_UNMET = "scenario target unmet"


@dataclass
class ExperimentPlan:
    protocols: list[str] = field(default_factory=lambda: list(PROTOCOLS))
    scenarios: list[int] = field(default_factory=lambda: list(SCENARIOS))
    node_counts: list[int] = field(default_factory=lambda: list(DEFAULT_NODES))
    seeds: list[int] = field(default_factory=lambda: list(range(1, DEFAULT_SEEDS + 1)))
    overrides: dict = field(default_factory=dict)
    out: Path = Path("results")
    fmt: str = "csv"
    trace: bool = False
    jobs: int | None = None

    def validate(self) -> None:
        if not (self.protocols and self.scenarios and self.node_counts and self.seeds):
            raise ConfigurationError("plan needs at least one protocol, scenario, node count and seed")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise ConfigurationError(f"unknown protocol {p!r}")
        for s in self.scenarios:
            if s not in SCENARIOS:
                raise ConfigurationError(f"unknown scenario {s!r}")
        for n in self.node_counts:
            if n < 2:
                raise ConfigurationError(f"node count must be at least 2, got {n}")
        if self.fmt not in ("csv", "json"):
            raise ConfigurationError(f"unknown format {self.fmt!r}")
        # surface bad override keys and values before any run starts
        base_config(self).validate()

    def cells(self):
        for p in self.protocols:
            for s in self.scenarios:
                for n in self.node_counts:
                    for seed in self.seeds:
                        yield p, s, n, seed

    def __len__(self) -> int:
        return len(self.protocols) * len(self.scenarios) * len(self.node_counts) * len(self.seeds)


def base_config(plan: ExperimentPlan) -> SimConfig:
    return apply_overrides(SimConfig(), plan.overrides)


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hmacsim",
        description="Run H-MAC vs EDCA experiment sweeps and write CSV/JSON results.",
    )
    ap.add_argument("--protocol", help="comma list from {edca,hmac} (default: both)")
    ap.add_argument("--scenario", help="comma list from {1,2} (default: both)")
    ap.add_argument("--nodes", help="comma list of node counts (default: 5,10,25,50,100)")
    seeds = ap.add_mutually_exclusive_group()
    seeds.add_argument("--seeds", type=int, help="number of seeds, numbered from 1 (default: 5)")
    seeds.add_argument("--seed-list", help="explicit comma list of seeds")
    ap.add_argument("--duration", type=int, help="simulated ticks (µs) per run")
    ap.add_argument("--config", help="flat key=value file of SimConfig overrides")
    ap.add_argument("--out", default="results", help="output directory (default: results)")
    ap.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    ap.add_argument("--trace", action="store_true", help="write trace/<run-id>.log per run")
    ap.add_argument("--jobs", type=int, default=None, help="parallel runs (default: CPU count)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def parse_args(argv=None) -> ExperimentPlan:
    """Build a validated plan; precedence is flag > config file > default."""
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        file_values = read_config_file(args.config) if args.config else {}
        plan = ExperimentPlan(out=Path(args.out), fmt=args.fmt, trace=args.trace, jobs=args.jobs)
        overrides = {}
        for key, value in file_values.items():
            if key == "protocol":
                plan.protocols = _str_list(value)
            elif key == "scenario":
                plan.scenarios = _int_list(value)
            elif key == "node_count":
                plan.node_counts = _int_list(value)
            elif key == "seed":
                plan.seeds = _int_list(value)
            else:
                overrides[key] = value
        if args.protocol:
            plan.protocols = _str_list(args.protocol)
        if args.scenario:
            plan.scenarios = _int_list(args.scenario)
        if args.nodes:
            plan.node_counts = _int_list(args.nodes)
        if args.seeds is not None:
            if args.seeds < 1:
                raise ConfigurationError("--seeds must be at least 1")
            plan.seeds = list(range(1, args.seeds + 1))
        elif args.seed_list:
            plan.seeds = _int_list(args.seed_list)
        if args.duration is not None:
            overrides["duration"] = args.duration
        if args.jobs is not None and args.jobs < 1:
            raise ConfigurationError("--jobs must be at least 1")
        plan.overrides = overrides
        plan.validate()
    except ConfigurationError as exc:
        ap.error(str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return plan


def run_id(protocol: str, scenario: int, nodes: int, seed: int) -> str:
    return f"{protocol}-s{scenario}-n{nodes}-seed{seed}"


def _run_cell(task):
    config, cell = task
    try:
        return cell, run(config), None
    except Exception as exc:  # reported after the remaining runs finish
        return cell, None, f"{type(exc).__name__}: {exc}"


def _tasks(plan: ExperimentPlan):
    base = base_config(plan)
    trace_dir = plan.out / "trace"
    for cell in plan.cells():
        protocol, scenario, nodes, seed = cell
        trace = str(trace_dir / f"{run_id(*cell)}.log") if plan.trace else None
        cfg = replace(base, protocol=protocol, scenario=scenario, node_count=nodes, seed=seed, trace=trace)
        yield cfg, cell


def summarize(results) -> list[dict]:
    """Seed-averaged rows per (protocol, scenario, node_count, class)."""
    groups: dict = {}
    for m in results:
        groups.setdefault((m.protocol, m.scenario, m.node_count), []).append(m)
    out = []
    for (protocol, scenario, nodes), runs in sorted(groups.items()):
        unmet = any(not m.scenario_target_met for m in runs)
        a_mean, a_std = mean_std(m.measured_a_col for m in runs)
        for i, name in enumerate(CLASS_NAMES):
            t_mean, t_std = mean_std(m.class_throughputs()[i] for m in runs)
            pdrs = [p for p in (pdr_or_none(m.classes[i]) for m in runs) if p is not None]
            p_mean, p_std = mean_std(pdrs) if pdrs else (None, None)
            out.append({
                "protocol": protocol, "scenario": scenario, "node_count": nodes, "class": name,
                "seeds": len(runs),
                "throughput_bps_mean": t_mean, "throughput_bps_std": t_std,
                "pdr_mean": p_mean, "pdr_std": p_std,
                "a_col_mean": a_mean, "a_col_std": a_std,
                "note": TARGET_UNMET if unmet else "",
            })
    return out


def comparisons(summary) -> list[dict]:
    """H-MAC against EDCA for every (scenario, node_count) with both present."""
    means = {}
    for row in summary:
        key = (row["scenario"], row["node_count"])
        means.setdefault(key, {}).setdefault(row["protocol"], []).append(row["throughput_bps_mean"])
    out = []
    for (scenario, nodes), by_proto in sorted(means.items()):
        if "hmac" not in by_proto or "edca" not in by_proto:
            continue
        c = compare_throughputs(by_proto["hmac"], by_proto["edca"], scenario, nodes)
        row = {
            "scenario": scenario, "node_count": nodes,
            "hmac_aggregate_bps": c.aggregate_a, "edca_aggregate_bps": c.aggregate_b,
            "improvement_pct": c.improvement_pct,
            "hmac_starved": ";".join(n for n, s in zip(CLASS_NAMES, c.starved_a) if s),
            "edca_starved": ";".join(n for n, s in zip(CLASS_NAMES, c.starved_b) if s),
        }
        for name, d in zip(CLASS_NAMES, c.class_delta_bps):
            row[f"delta_{name}_bps"] = d
        out.append(row)
    return out


def _write_csv(path: Path, columns, data) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in data:
            w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                        for c in columns])


def collect(plan: ExperimentPlan):
    """Run every cell; returns ``(results, failures)`` in plan order."""
    if plan.trace:
        (plan.out / "trace").mkdir(parents=True, exist_ok=True)
    tasks = list(_tasks(plan))
    jobs = min(plan.jobs or os.cpu_count() or 1, len(tasks))
    if jobs <= 1:
        outcomes = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # map keeps submission order, so output never depends on timing
            outcomes = list(pool.map(_run_cell, tasks))
    results, failures = [], []
    for cell, metrics, err in outcomes:
        if err is None:
            results.append(metrics)
        else:
            failures.append((cell, err))
            log.error("run %s failed: %s", run_id(*cell), err)
    return results, failures


def write_outputs(plan: ExperimentPlan, results) -> list[dict]:
    """Write runs, summary and comparison files; returns the comparison rows."""
    plan.out.mkdir(parents=True, exist_ok=True)
    emit(results, plan.fmt, plan.out / f"runs.{plan.fmt}")
    summary = summarize(results)
    _write_csv(plan.out / "summary.csv", SUMMARY_COLUMNS, summary)
    comp = comparisons(summary)
    _write_csv(plan.out / "comparison.csv", COMPARISON_COLUMNS, comp)
    return comp


def execute(plan: ExperimentPlan) -> int:
    """Run the plan, write outputs, and return a process exit code."""
    plan.out.mkdir(parents=True, exist_ok=True)
    results, failures = collect(plan)
    comp = write_outputs(plan, results)
    print(f"{len(results)}/{len(plan)} runs -> {plan.out}")
    for row in comp:
        pct = row["improvement_pct"]
        pct = "n/a" if pct is None else f"{pct:+.1f}%"
        print(f"  scenario {row['scenario']} nodes {row['node_count']:>3}: "
              f"hmac {row['hmac_aggregate_bps'] / 1e3:8.1f} kbps  "
              f"edca {row['edca_aggregate_bps'] / 1e3:8.1f} kbps  ({pct})")
    if failures:
        print(f"{len(failures)} run(s) failed", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    return execute(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
