"""Dynamic MAC parameter engine and the static EDCA baseline table.

Functions here are pure (or touch a single class's state) so they can be
unit-tested against hand traces. The simulator strings them together once
per burst and once per adaptation period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigurationError

NUM_CLASSES = 4
ACCESS_AVERAGE = 100 / 4  # minimum share (percent) kept for a higher class

AC_NAMES = ("AC_VO", "AC_VI", "AC_BE", "AC_BK")

# 802.11e defaults used as the "old" bounds of the adaptation algorithm
DEFAULT_CW = ((7, 15), (15, 31), (31, 1023), (31, 1023))


@dataclass(frozen=True)
class WeightConfig:
    """Class weights, strictly decreasing from UP to LP and below ``w_max``."""

    w: tuple[float, float, float, float] = (4.0, 3.0, 2.0, 1.0)
    w_max: float = 5.0

    def __post_init__(self):
        w = tuple(float(v) for v in self.w)
        object.__setattr__(self, "w", w)
        if len(w) != NUM_CLASSES:
            raise ConfigurationError(f"need {NUM_CLASSES} weights, got {len(w)}")
        chain = (self.w_max,) + w + (0.0,)
        if any(a <= b for a, b in zip(chain, chain[1:])):
            raise ConfigurationError(
                f"weights must satisfy w_max > w0 > w1 > w2 > w3 > 0, got "
                f"w_max={self.w_max}, w={w}"
            )

    def reduced(self) -> "WeightConfig":
        """Weights divided by the LP weight."""
        base = self.w[-1]
        return WeightConfig(tuple(v / base for v in self.w), self.w_max / base)


@dataclass(frozen=True)
class PhyParams:
    slot_time: int = 20  # µs
    sifs: int = 10  # µs
    t_ack: int = 56  # µs
    data_rate: float = 2.0  # bits per µs (2 Mbps)
    mpdu_bits: int = 8000
    phy_overhead_bits: int = 0

    def __post_init__(self):
        for name in ("slot_time", "sifs", "t_ack", "data_rate"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.mpdu_bits < 0 or self.phy_overhead_bits < 0:
            raise ConfigurationError("frame sizes must be non-negative")


@dataclass
class ClassAdaptState:
    class_index: int
    cw_min_default: int
    cw_max_default: int
    p_col: float = 0.0
    collisions_this_period: int = 0
    transmissions_this_period: int = 0
    cw_min: int = field(default=-1)
    cw_max: int = field(default=-1)
    retry_k: int = 0
    cw_current: int = field(default=-1)

    def __post_init__(self):
        if self.cw_min < 0:
            self.cw_min = self.cw_min_default
        if self.cw_max < 0:
            self.cw_max = self.cw_max_default
        if self.cw_current < 0:
            self.cw_current = self.cw_min


def default_adapt_states(defaults=DEFAULT_CW) -> list[ClassAdaptState]:
    return [ClassAdaptState(i, lo, hi) for i, (lo, hi) in enumerate(defaults)]


@dataclass
class MacParameterSet:
    """Per-class MAC parameters in force at one node (index = class)."""

    aifsn: list[int]
    aifs: list[int]
    txop_limit: list[int]
    cw: list[tuple[int, int]]
    pf: list[float] = field(default_factory=lambda: [1.0] * NUM_CLASSES)
    access_ratio: list[float] = field(default_factory=lambda: [0.0] * NUM_CLASSES)
    cx: list[float] = field(default_factory=lambda: [0.0] * NUM_CLASSES)
    burst_packets: list[int] = field(default_factory=lambda: [1] * NUM_CLASSES)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")


def ewma(previous: float, current: float, alpha: float) -> float:
    _check_alpha(alpha)
    return (1.0 - alpha) * current + alpha * previous


def update_collision_ewma(state: ClassAdaptState, alpha: float) -> ClassAdaptState:
    """Fold the finished period's collision ratio into ``p_col``.

    A period with no transmissions counts as collision-free. Period counters
    are reset.
    """
    _check_alpha(alpha)
    tx = state.transmissions_this_period
    current = state.collisions_this_period / tx if tx else 0.0
    state.p_col = (1.0 - alpha) * current + alpha * state.p_col
    state.collisions_this_period = 0
    state.transmissions_this_period = 0
    return state


def access_ratios(x, p_col, weights: WeightConfig):
    """Access ratio per class from queue shares, collision rates and weights.

    Returns ``(cx, ar)``. The clamps keep a higher class from dropping below
    ``Av`` percent when a lower class would otherwise overtake it; they run in
    order UP, HP, MP, LP on the partially clamped values.
    """
    av = ACCESS_AVERAGE
    cx = [x[i] * (1.0 + p_col[i]) * 100.0 for i in range(NUM_CLASSES)]
    if cx[0] < av:
        cx[0] = av
    if cx[1] > cx[0] or cx[1] < cx[2] or cx[1] < cx[3]:
        cx[1] = av
    if cx[2] > cx[0] or cx[2] > cx[1] or cx[2] < cx[3]:
        cx[2] = av
    if cx[3] > cx[0] or cx[3] > cx[1] or cx[3] > cx[2]:
        cx[3] = av
    ar = [weights.w[i] * cx[i] for i in range(NUM_CLASSES)]
    return cx, ar


def transmission_time(phy: PhyParams) -> float:
    """Channel time of one data frame with its ACK exchange, in µs."""
    t_data = (phy.mpdu_bits + phy.phy_overhead_bits) / phy.data_rate
    return t_data + 2 * phy.sifs + phy.t_ack


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def burst_packets(ar, budget: int) -> list[int]:
    """Split a per-round budget of frames across classes in AR proportion."""
    total = sum(ar)
    if total <= 0:
        return [1] * NUM_CLASSES
    out = []
    for a in ar:
        n = _round_half_up(a / total * budget)
        if a > 0:
            n = max(n, 1)
        out.append(n)
    return out


def _inherit(values: list, x) -> list:
    for i in range(1, NUM_CLASSES):
        if x[i - 1] == 0:
            values[i] = values[i - 1]
    return values


def txop_limits(ar, tr: float, x, sifs: float, mode: str = "normalized",
                burst_budget: int = 16) -> list[float]:
    """TXOP limit per class (µs), then handed down past empty higher queues."""
    if tr <= 0:
        raise ConfigurationError("Tr must be positive")
    if mode == "raw":
        limits = [a * tr - sifs for a in ar]
    elif mode == "normalized":
        if burst_budget < NUM_CLASSES:
            raise ConfigurationError("burst budget must be at least 4 frames")
        limits = [n * tr - sifs for n in burst_packets(ar, burst_budget)]
    else:
        raise ConfigurationError(f"unknown TXOP mode {mode!r}")
    return _inherit(limits, x)


def base_aifsn(weights: WeightConfig) -> list[int]:
    total = sum(weights.w)
    return [int(math.floor(total / w)) for w in weights.w]


def aifsn_values(weights: WeightConfig, x) -> list[int]:
    """Weight-proportional AIFSN; empty higher queues hand theirs down."""
    return _inherit(base_aifsn(weights), x)


def aifs_duration(aifsn: int, phy: PhyParams) -> int:
    return phy.sifs + aifsn * phy.slot_time


def priority_factors(weights: WeightConfig) -> list[float]:
    total = sum(weights.w)
    return [1.0 - w / total for w in weights.w]


def mean_collision_rate(states) -> float:
    return sum(s.p_col for s in states) / len(states)


def adapt_contention_windows(states, t_col: float, x,
                             a_col: float | None = None) -> list[tuple[int, int]]:
    """New ``(cw_min, cw_max)`` per class.

    Bounds are derived from each class's defaults: when the mean collision
    rate reaches ``t_col`` the windows are stretched and chained upward,
    otherwise defaults apply. Empty higher queues then hand their bounds
    down, and ``cw_min`` is capped at ``cw_max``. The result is also written
    to the states.
    """
    if not 0.0 < t_col < 1.0:
        raise ConfigurationError(f"T_col must lie in (0, 1), got {t_col}")
    if a_col is None:
        a_col = mean_collision_rate(states)
    lo_old = [s.cw_min_default for s in states]
    hi_old = [s.cw_max_default for s in states]
    lo, hi = list(lo_old), list(hi_old)
    if a_col >= t_col:
        for i in range(NUM_CLASSES - 1):
            hi[i] = 2 * (hi_old[i] - lo_old[i])
            lo[i + 1] = hi[i]
        lo[0] = lo_old[0]
        hi[NUM_CLASSES - 1] = hi_old[NUM_CLASSES - 1]
    bounds = _inherit(list(zip(lo, hi)), x)
    bounds = [(min(a, b), b) for a, b in bounds]
    for s, (a, b) in zip(states, bounds):
        s.cw_min, s.cw_max = a, b
    return bounds


def backoff_duration(class_index: int, k: int, draw: int, slot_time: int,
                     protocol: str, pf: float = 1.0,
                     pf_exponent: str = "class_and_retry") -> int:
    """Backoff time in µs for a uniform ``draw`` from ``[0, CW]``.

    EDCA scales by ``2**k``; H-MAC scales by the class priority factor raised
    to ``2 + i + k`` (or ``2 + k`` under the alternative exponent).
    """
    if k < 0 or draw < 0:
        raise ValueError("retry count and draw must be non-negative")
    if protocol == "edca":
        return int(math.floor((2 ** k) * draw * slot_time))
    if protocol == "hmac":
        if pf_exponent == "class_and_retry":
            e = 2 + class_index + k
        elif pf_exponent == "retry":
            e = 2 + k
        else:
            raise ConfigurationError(f"unknown PF exponent mode {pf_exponent!r}")
        return int(math.floor((pf ** e) * draw * slot_time))
    raise ConfigurationError(f"unknown protocol {protocol!r}")


def grow_cw(cw: int, cw_max: int) -> int:
    """Next contention window after a failure: doubled window size, capped."""
    return min(2 * cw + 1, cw_max)


@dataclass(frozen=True)
class EdcaTable:
    """Static per-AC parameters of the 802.11e baseline."""

    aifsn: tuple[int, ...] = (2, 2, 3, 7)
    cw: tuple[tuple[int, int], ...] = DEFAULT_CW
    # None means one frame: Tr - SIFS
    txop_limit: tuple[int | None, ...] = (3008, 6016, None, None)

    def for_class(self, class_index: int, tr: float | None = None, sifs: int = 10) -> dict:
        txop = self.txop_limit[class_index]
        if txop is None:
            if tr is None:
                raise ValueError("Tr needed for single-frame TXOP")
            txop = tr - sifs
        return {
            "ac": AC_NAMES[class_index],
            "aifsn": self.aifsn[class_index],
            "cw_min": self.cw[class_index][0],
            "cw_max": self.cw[class_index][1],
            "txop_limit": txop,
        }

    def query(self, ac: str, tr: float | None = None, sifs: int = 10) -> dict:
        return self.for_class(AC_NAMES.index(ac), tr, sifs)


def static_edca_params(phy: PhyParams | None = None,
                       table: EdcaTable | None = None) -> MacParameterSet:
    phy = phy or PhyParams()
    table = table or EdcaTable()
    tr = transmission_time(phy)
    rows = [table.for_class(i, tr, phy.sifs) for i in range(NUM_CLASSES)]
    return MacParameterSet(
        aifsn=[r["aifsn"] for r in rows],
        aifs=[aifs_duration(r["aifsn"], phy) for r in rows],
        txop_limit=[int(r["txop_limit"]) for r in rows],
        cw=[(r["cw_min"], r["cw_max"]) for r in rows],
    )


def hmac_params(x, states, weights: WeightConfig, phy: PhyParams, t_col: float,
                tr: float, burst_budget: int = 16, txop_mode: str = "normalized",
                a_col: float | None = None) -> MacParameterSet:
    """Full H-MAC parameter set for one node's current queue and collision state."""
    p_col = [s.p_col for s in states]
    cx, ar = access_ratios(x, p_col, weights)
    txop = txop_limits(ar, tr, x, phy.sifs, txop_mode, burst_budget)
    aifsn = aifsn_values(weights, x)
    cw = adapt_contention_windows(states, t_col, x, a_col)
    return MacParameterSet(
        aifsn=aifsn,
        aifs=[aifs_duration(n, phy) for n in aifsn],
        txop_limit=[int(t) for t in txop],
        cw=cw,
        pf=priority_factors(weights),
        access_ratio=ar,
        cx=cx,
        burst_packets=burst_packets(ar, burst_budget),
    )


def override_table(table: EdcaTable, **changes) -> EdcaTable:
    return replace(table, **changes)
