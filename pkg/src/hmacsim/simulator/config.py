"""Experiment configuration and scenario presets."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace

from ..adaptation import EdcaTable, PhyParams, WeightConfig, transmission_time
from ..errors import ConfigurationError

log = logging.getLogger(__name__)

PROTOCOLS = ("edca", "hmac")
SCENARIOS = (1, 2)
TOPOLOGY_MODES = ("abstract", "geometric")
CHANNEL_MODES = ("single_domain", "interference_graph")

# Per-node Poisson arrival rate (packets per tick) and background frame
# failure probability that each scenario falls back to when not overridden.
SCENARIO_DEFAULTS = {
    1: {"lam": 1.0e-6, "background_collision_p": 0.0},
    2: {"lam": 1.5e-5, "background_collision_p": 0.35},
}


@dataclass(frozen=True)
class TrafficConfig:
    model: str = "poisson"
    lam: float | None = None  # packets per tick per node; None -> scenario preset
    cbr_interval: int = 500_000  # ticks
    mu: float | None = None  # service rate, only used to report rho
    up_probability: float = 0.25
    class_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)  # HP, MP, LP
    lifetime_max: int = 20
    hop_min: int = 1
    hop_max: int = 10
    lifetime_unit_scale: int | None = None  # ticks per lifetime unit; None -> Tr

    def validate(self) -> None:
        if self.model not in ("poisson", "cbr"):
            raise ConfigurationError(f"unknown traffic model {self.model!r}")
        if self.lam is not None and self.lam < 0:
            raise ConfigurationError("lam must be non-negative")
        if self.cbr_interval <= 0:
            raise ConfigurationError("cbr_interval must be positive")
        if not 0.0 <= self.up_probability <= 1.0:
            raise ConfigurationError("up_probability must lie in [0, 1]")
        if len(self.class_mix) != 3 or any(p < 0 for p in self.class_mix) or sum(self.class_mix) <= 0:
            raise ConfigurationError("class_mix needs three non-negative weights for HP, MP, LP")
        if not 1 <= self.hop_min <= self.hop_max:
            raise ConfigurationError("need 1 <= hop_min <= hop_max")
        if self.hop_max > self.lifetime_max:
            raise ConfigurationError("hop_max cannot exceed lifetime_max")
        if self.lifetime_unit_scale is not None and self.lifetime_unit_scale <= 0:
            raise ConfigurationError("lifetime_unit_scale must be positive")

    def rho(self) -> float | None:
        if self.mu is None or self.lam is None:
            return None
        return self.lam / self.mu


@dataclass(frozen=True)
class SimConfig:
    protocol: str = "hmac"
    node_count: int = 10
    duration: int = 10_000_000  # ticks (µs)
    seed: int = 1
    scenario: int = 1
    topology_mode: str = "abstract"
    channel_mode: str = "single_domain"
    area: tuple[float, float] = (1000.0, 1000.0)
    tx_range: float = 250.0
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    phy: PhyParams = field(default_factory=PhyParams)
    weights: WeightConfig = field(default_factory=WeightConfig)
    edca: EdcaTable = field(default_factory=EdcaTable)
    t_up_slots: int = 5000
    t_col: float = 0.5
    alpha: float = 0.8
    burst_budget: int = 16
    txop_mode: str = "normalized"
    pf_exponent: str = "class_and_retry"
    hmac_access: str = "node"  # "node": one contender per node; "class": one per queue
    queue_capacity: int = 50
    retry_limit: int = 7
    background_collision_p: float | None = None  # None -> scenario preset
    trace: str | None = None

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(f"unknown protocol {self.protocol!r}")
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        if self.node_count < 2:
            raise ConfigurationError("node_count must be at least 2")
        if self.duration < 0:
            raise ConfigurationError("duration must be non-negative")
        if self.topology_mode not in TOPOLOGY_MODES:
            raise ConfigurationError(f"unknown topology mode {self.topology_mode!r}")
        if self.channel_mode not in CHANNEL_MODES:
            raise ConfigurationError(f"unknown channel mode {self.channel_mode!r}")
        if self.tx_range <= 0 or min(self.area) <= 0:
            raise ConfigurationError("area and tx_range must be positive")
        if self.t_up_slots <= 0:
            raise ConfigurationError("t_up_slots must be positive")
        if not 0.0 < self.t_col < 1.0:
            raise ConfigurationError("t_col must lie in (0, 1)")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")
        if self.burst_budget < 4:
            raise ConfigurationError("burst_budget must be at least 4")
        if self.txop_mode not in ("normalized", "raw"):
            raise ConfigurationError(f"unknown txop mode {self.txop_mode!r}")
        if self.pf_exponent not in ("class_and_retry", "retry"):
            raise ConfigurationError(f"unknown pf exponent mode {self.pf_exponent!r}")
        if self.hmac_access not in ("node", "class"):
            raise ConfigurationError(f"unknown hmac_access mode {self.hmac_access!r}")
        if self.queue_capacity < 1:
            raise ConfigurationError("queue_capacity must be at least 1")
        if self.retry_limit < 1:
            raise ConfigurationError("retry_limit must be at least 1")
        p = self.background_collision_p
        if p is not None and not 0.0 <= p <= 1.0:
            raise ConfigurationError("background_collision_p must lie in [0, 1]")
        self.traffic.validate()

    @property
    def tr(self) -> int:
        return int(round(transmission_time(self.phy)))

    @property
    def t_up(self) -> int:
        return self.t_up_slots * self.phy.slot_time

    @property
    def lifetime_unit(self) -> int:
        scale = self.traffic.lifetime_unit_scale
        return self.tr if scale is None else scale


def scenario_control(config: SimConfig) -> SimConfig:
    """Fill scenario-dependent knobs that the caller left unset.

    Both scenarios draw an equal share of UP, HP, MP and LP packets unless the
    caller overrides the mix. Scenario 2 raises the load and adds independent
    background frame failures to push the collision rate past the threshold.
    """
    config.validate()
    preset = SCENARIO_DEFAULTS[config.scenario]
    traffic = config.traffic
    if traffic.lam is None:
        traffic = replace(traffic, lam=preset["lam"])
    bg = config.background_collision_p
    if bg is None:
        bg = preset["background_collision_p"]
    return replace(config, traffic=traffic, background_collision_p=bg)


def scenario_target_met(scenario: int, a_col: float, t_col: float = 0.5) -> bool:
    if scenario == 1:
        return a_col < t_col
    return a_col >= t_col


def config_keys() -> list[str]:
    """Flat override keys accepted by :func:`apply_overrides`."""
    keys = [f.name for f in fields(SimConfig) if f.name not in ("traffic", "phy", "weights", "edca")]
    keys += [f"traffic.{f.name}" for f in fields(TrafficConfig)]
    keys += [f"phy.{f.name}" for f in fields(PhyParams)]
    keys += ["weights.w", "weights.w_max", "edca.aifsn", "edca.cw", "edca.txop_limit"]
    return keys


def _coerce(value, like, key):
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("none", "null", ""):
            return None
        if isinstance(like, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(like, int) and not isinstance(like, bool):
            try:
                return int(float(text)) if "e" in text.lower() else int(text)
            except ValueError as exc:
                raise ConfigurationError(f"{key}: expected an integer, got {text!r}") from exc
        if isinstance(like, float) or like is None:
            try:
                return float(text) if any(c in text for c in ".eE") else int(text)
            except ValueError:
                return text
        if isinstance(like, tuple):
            parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
            return tuple(float(p) for p in parts)
        return text
    return value


def _pairs(values):
    vals = [int(v) for v in values]
    if len(vals) != 8:
        raise ConfigurationError("edca.cw needs 8 numbers (min,max per class)")
    return tuple(zip(vals[0::2], vals[1::2]))


def apply_overrides(config: SimConfig, overrides: dict) -> SimConfig:
    """Return ``config`` with flat ``section.key=value`` overrides applied."""
    known = set(config_keys())
    top, traffic, phy, weights, edca = {}, {}, {}, {}, {}
    for key, raw in overrides.items():
        if key not in known:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        section, _, name = key.rpartition(".")
        if section == "traffic":
            traffic[name] = _coerce(raw, getattr(config.traffic, name), key)
        elif section == "phy":
            phy[name] = _coerce(raw, getattr(config.phy, name), key)
        elif section == "weights":
            weights[name] = _coerce(raw, getattr(config.weights, name), key)
        elif section == "edca":
            val = _coerce(raw, (), key)
            if name == "cw":
                val = _pairs(val)
            elif name == "aifsn":
                val = tuple(int(v) for v in val)
            else:
                val = tuple(None if v < 0 else int(v) for v in val)
            edca[name] = val
        else:
            current = getattr(config, name)
            val = _coerce(raw, current, key)
            if name == "area" and isinstance(val, tuple):
                val = (float(val[0]), float(val[1]))
            top[name] = val
    if "class_mix" in traffic and traffic["class_mix"] is not None:
        traffic["class_mix"] = tuple(traffic["class_mix"])
    if traffic:
        top["traffic"] = replace(config.traffic, **traffic)
    if phy:
        top["phy"] = replace(config.phy, **phy)
    if weights:
        top["weights"] = replace(config.weights, **weights)
    if edca:
        top["edca"] = replace(config.edca, **edca)
    return replace(config, **top)
