"""Packet generation at traffic sources."""

from __future__ import annotations

import random
from itertools import count

from ..urgency import Packet, compute_dui
from .config import TrafficConfig

_ids = count()


def choose_spi(rng: random.Random, class_mix) -> int:
    u = rng.random() * sum(class_mix)
    acc = 0.0
    for i, p in enumerate(class_mix):
        acc += p
        if u < acc:
            return i + 1
    return len(class_mix)


def generate_packet(node: int, now: int, traffic: TrafficConfig, rng: random.Random,
                    node_count: int, lifetime_unit: int, payload_bits: int = 8000,
                    packet_id: int | None = None, hops: int | None = None,
                    dest: int | None = None) -> Packet:
    """Draw a fresh packet at ``node``.

    Hop count is uniform on ``[hop_min, hop_max]`` unless ``hops`` is forced
    (geometric routing fixes it to the path length); lifetime is uniform on
    ``[hops, lifetime_max]`` units, scaled to ticks.
    """
    h = rng.randint(traffic.hop_min, traffic.hop_max) if hops is None else hops
    units = rng.randint(h, traffic.lifetime_max) if h <= traffic.lifetime_max else h
    spi = choose_spi(rng, traffic.class_mix)
    qf = 1 if rng.random() < traffic.up_probability else 0
    if dest is None:
        dest = rng.randrange(node_count - 1)
        if dest >= node:
            dest += 1
    pkt = Packet(
        id=next(_ids) if packet_id is None else packet_id,
        spi=spi,
        qf=qf,
        lifetime=units * lifetime_unit,
        total_hops=h,
        generation_time=now,
        source_id=node,
        dest_id=dest,
        payload_bits=payload_bits,
    )
    compute_dui(pkt)
    return pkt


def next_arrival_gap(traffic: TrafficConfig, rng: random.Random) -> int | None:
    """Ticks until the next packet, or None when the source is silent."""
    if traffic.model == "cbr":
        return traffic.cbr_interval
    if not traffic.lam:
        return None
    return max(1, int(round(rng.expovariate(traffic.lam))))
