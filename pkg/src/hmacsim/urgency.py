"""Per-packet dynamic urgency.

A packet carries its lifetime budget and hop accounting. At every hop the
local delay is folded into the cumulative delay, the per-hop delay threshold
is recomputed from the remaining budget, and the Dynamic Urgency Index (DUI)
is refreshed. Lower DUI means more urgent.

All times are integer simulation ticks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

from .errors import MonotonicClockError, NoThresholdError, OvertraversalError


class ServiceClass(IntEnum):
    """Static priority index of a user (and the queue index it maps to)."""

    UP = 0
    HP = 1
    MP = 2
    LP = 3


CLASS_NAMES = tuple(c.name for c in ServiceClass)


@dataclass(slots=True, eq=False)
class Packet:
    id: int
    spi: int
    qf: int
    lifetime: int
    total_hops: int
    generation_time: int
    source_id: int = 0
    dest_id: int = 0
    payload_bits: int = 8000
    hops_traversed: int = 0
    cumulative_delay: int = 0
    last_arrival_time: int = field(default=-1)
    hop_success_count: int = 0
    dui: float = 0.0
    retries: int = 0

    def __post_init__(self):
        if self.last_arrival_time < 0:
            self.last_arrival_time = self.generation_time

    @property
    def remaining_hops(self) -> int:
        return self.total_hops - self.hops_traversed

    @property
    def service_class(self) -> int:
        """Queue index: urgent-flagged packets go to the UP queue."""
        return 0 if self.qf else self.spi


def delay_threshold(packet: Packet) -> float:
    """Per-hop delay budget ``(LT - CD) / H_i`` at the packet's current node.

    Negative when the packet is already past its lifetime; the caller decides
    what to do with expired packets.
    """
    remaining = packet.total_hops - packet.hops_traversed
    if remaining < 1:
        raise NoThresholdError(f"packet {packet.id} has no remaining hops")
    return (packet.lifetime - packet.cumulative_delay) / remaining


def success_probability(packet: Packet) -> float:
    """Fraction of hops so far that finished within their threshold.

    A packet that has not traversed any hop has no lateness evidence and
    scores 1.0.
    """
    if packet.hops_traversed == 0:
        return 1.0
    return packet.hop_success_count / packet.hops_traversed


def compute_dui(packet: Packet) -> float:
    """Recompute and store the packet's DUI (threshold times success ratio)."""
    packet.dui = delay_threshold(packet) * success_probability(packet)
    return packet.dui


def is_expired(packet: Packet) -> bool:
    return packet.cumulative_delay >= packet.lifetime


def record_hop_arrival(packet: Packet, arrival_time: int) -> Packet:
    """Account for the packet arriving at the next node at ``arrival_time``.

    The hop counts as a success when its local delay did not exceed the
    threshold that was in force when the hop began. The DUI is refreshed
    unless the packet has reached its destination.
    """
    if arrival_time < packet.last_arrival_time:
        raise MonotonicClockError(
            f"packet {packet.id}: arrival {arrival_time} precedes "
            f"previous arrival {packet.last_arrival_time}"
        )
    if packet.hops_traversed >= packet.total_hops:
        raise OvertraversalError(
            f"packet {packet.id} already traversed all {packet.total_hops} hops"
        )
    budget = delay_threshold(packet)
    local_delay = arrival_time - packet.last_arrival_time
    packet.cumulative_delay += local_delay
    packet.hops_traversed += 1
    if local_delay <= budget:
        packet.hop_success_count += 1
    packet.last_arrival_time = arrival_time
    if packet.hops_traversed < packet.total_hops:
        compute_dui(packet)
    return packet
