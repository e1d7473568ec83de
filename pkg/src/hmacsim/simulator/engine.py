"""Discrete-event engine for EDCA and H-MAC contention.

Time is an integer tick (1 µs). A contender waits its AIFS and then counts
its backoff down, but only while its node senses an idle medium; a busy
medium freezes the countdown and a fresh AIFS is needed once it clears.
Contenders that finish within one slot of each other cannot hear each other
start, so their frames overlap and collide.

Under EDCA every class queue of a node is its own virtual station and
simultaneous expiries inside a node are resolved in favour of the lowest
class index. Under H-MAC (default ``hmac_access="node"``) the node contends
once, with the MAC parameters of its currently most urgent queue, and on
winning grants the TXOP to the queue whose head packet has the lowest DUI.

Events at equal ticks run in the order frame-end, medium-idle, arrival,
adaptation tick, contention-ready, then insertion order.
"""

from __future__ import annotations

import heapq
import logging
import random
from itertools import count

from .. import adaptation as ad
from ..metrics import RunMetrics
from ..queues import NUM_CLASSES, QueueSet, burst_size, enqueue, expired_packets, queue_shares, select_service_queue
from ..urgency import is_expired, record_hop_arrival
from .config import SimConfig, scenario_control, scenario_target_met
from .topology import Topology
from .traffic import generate_packet, next_arrival_gap

log = logging.getLogger(__name__)

FRAME_END, MEDIUM_IDLE, ARRIVAL, ADAPT, READY = range(5)
INF = float("inf")


class Entity:
    """A contender: one class queue's AIFS wait and backoff counter."""

    __slots__ = ("cls", "backoff", "start", "aifs")

    def __init__(self, cls: int):
        self.cls = cls
        self.backoff = 0
        self.start = 0
        self.aifs = 0

    @property
    def ready(self) -> int:
        return self.start + self.aifs + self.backoff


class Node:
    __slots__ = ("id", "rng", "qs", "adapt", "params", "credits", "entities",
                 "idle", "busy_until", "version", "ready_at", "neighbors")

    def __init__(self, node_id: int, seed: int, capacity: int, fifo: bool, cw_defaults):
        self.id = node_id
        self.rng = random.Random(f"hmacsim/{seed}/node/{node_id}")
        self.qs = QueueSet(capacity, fifo=fifo)
        self.adapt = ad.default_adapt_states(cw_defaults)
        self.params: ad.MacParameterSet | None = None
        self.credits = [0] * NUM_CLASSES
        self.entities: list[Entity | None] = [None] * NUM_CLASSES
        self.idle = True
        self.busy_until = 0
        self.version = 0
        self.ready_at = INF
        self.neighbors: list[Node] = []

    @property
    def phase(self) -> str:
        if not any(self.entities):
            return "idle"
        if not self.idle:
            return "deferring"
        return "contending"

    @property
    def active_class(self) -> int | None:
        for e in self.entities:
            if e is not None:
                return e.cls
        return None


class Burst:
    __slots__ = ("cls", "frames", "idx", "receiver", "t0", "triggers")

    def __init__(self, cls, frames, triggers):
        self.cls = cls
        self.frames = frames
        self.idx = 0
        self.receiver = -1
        self.t0 = 0
        self.triggers = triggers


class Simulation:
    def __init__(self, config: SimConfig):
        cfg = scenario_control(config)
        self.cfg = cfg
        self.hmac = cfg.protocol == "hmac"
        self.per_node = self.hmac and cfg.hmac_access == "node"
        phy = cfg.phy
        self.slot = phy.slot_time
        self.sifs = phy.sifs
        self.tr = cfg.tr
        self.lifetime_unit = cfg.lifetime_unit
        self.bg_p = cfg.background_collision_p or 0.0
        self.retry_limit = cfg.retry_limit
        self.duration = cfg.duration
        self.single_domain = cfg.channel_mode == "single_domain"
        self.metrics = RunMetrics(cfg.protocol, cfg.node_count, cfg.scenario, cfg.seed, cfg.duration)
        self.cm = self.metrics.classes
        self.edca = ad.static_edca_params(phy, cfg.edca)
        self.edca_burst = [burst_size(t, self.tr, self.sifs) for t in self.edca.txop_limit]
        topo_rng = random.Random(f"hmacsim/{cfg.seed}/topology")
        self.topology = Topology(cfg.node_count, cfg.topology_mode, cfg.area, cfg.tx_range,
                                 topo_rng, place=not self.single_domain)
        self.nodes = [Node(i, cfg.seed, cfg.queue_capacity, not self.hmac, cfg.edca.cw)
                      for i in range(cfg.node_count)]
        for n in self.nodes:
            n.neighbors = [self.nodes[j] for j in self.topology.neighbors(n.id)]
            if self.hmac:
                self._refresh_params(n)
                n.credits = list(n.params.burst_packets)
            else:
                n.params = self.edca
        self.heap: list = []
        self._seq = count()
        self._pid = count()
        self.air: list[tuple[int, int, int]] = []
        self.bursts: dict[int, Burst] = {}
        self.now = 0
        self._trace = None
        self.events = 0

    # -- event plumbing -------------------------------------------------
    def _push(self, t, kind, a=None, b=None):
        heapq.heappush(self.heap, (t, kind, next(self._seq), a, b))

    def _log(self, t, node, kind, cls, pid):
        if self._trace is not None:
            self._trace.write(f"{t} {node} {kind} {cls} {pid}\n")

    def run(self) -> RunMetrics:
        cfg = self.cfg
        if cfg.trace:
            self._trace = open(cfg.trace, "w")
        try:
            self._run()
        finally:
            if self._trace is not None:
                self._trace.close()
                self._trace = None
        self._finish()
        return self.metrics

    def _run(self):
        if self.duration <= 0:
            return
        traffic = self.cfg.traffic
        for n in self.nodes:
            if traffic.model == "cbr":
                first = n.rng.randrange(traffic.cbr_interval)
            else:
                first = next_arrival_gap(traffic, n.rng)
            if first is not None and first < self.duration:
                self._push(first, ARRIVAL, n.id)
        if self.cfg.t_up < self.duration:
            self._push(self.cfg.t_up, ADAPT)
        heap = self.heap
        pop = heapq.heappop
        nodes = self.nodes
        duration = self.duration
        while heap:
            t, kind, _, a, b = pop(heap)
            if t >= duration:
                break
            self.now = t
            self.events += 1
            if kind == FRAME_END:
                self._frame_end(nodes[a], t)
            elif kind == MEDIUM_IDLE:
                node = nodes[a]
                if node.busy_until == t and not node.idle:
                    self._resume(node, t)
            elif kind == ARRIVAL:
                self._arrival(nodes[a], t)
            elif kind == ADAPT:
                self._adapt(t)
            elif kind == READY:
                node = nodes[a]
                if node.version == b and node.idle:
                    self._ready(node, t)

    # -- contention state -----------------------------------------------
    def _refresh_params(self, node: Node):
        cfg = self.cfg
        node.params = ad.hmac_params(queue_shares(node.qs), node.adapt, cfg.weights, cfg.phy,
                                     cfg.t_col, self.tr, cfg.burst_budget, cfg.txop_mode)

    def _draw(self, node: Node, cls: int) -> int:
        st = node.adapt[cls]
        lo, hi = node.params.cw[cls]
        cw = st.cw_current
        if cw < lo:
            cw = lo
        if cw > hi:
            cw = hi
        st.cw_current = cw
        draw = node.rng.randint(0, cw)
        if self.hmac:
            return ad.backoff_duration(cls, st.retry_k, draw, self.slot, "hmac",
                                       node.params.pf[cls], self.cfg.pf_exponent)
        return ad.backoff_duration(cls, st.retry_k, draw, self.slot, "edca")

    def _schedule_ready(self, node: Node):
        node.version += 1
        best = INF
        for e in node.entities:
            if e is not None:
                r = e.start + e.aifs + e.backoff
                if r < best:
                    best = r
        node.ready_at = best
        if best < INF:
            self._push(best, READY, node.id, node.version)

    def _freeze(self, node: Node, t: int):
        if not node.idle:
            return
        node.idle = False
        node.version += 1
        node.ready_at = INF
        for e in node.entities:
            if e is not None:
                elapsed = t - e.start - e.aifs
                if elapsed > 0:
                    e.backoff = e.backoff - elapsed if e.backoff > elapsed else 0

    def _resume(self, node: Node, t: int):
        node.idle = True
        aifs = node.params.aifs
        for e in node.entities:
            if e is not None:
                e.start = t
                e.aifs = aifs[e.cls]
        self._schedule_ready(node)

    def _add_entity(self, node: Node, cls: int, t: int):
        e = Entity(cls)
        e.backoff = self._draw(node, cls)
        node.entities[cls] = e
        if node.idle:
            e.start = t
            e.aifs = node.params.aifs[cls]
            r = e.start + e.aifs + e.backoff
            if r < node.ready_at:
                node.version += 1
                node.ready_at = r
                self._push(r, READY, node.id, node.version)

    def _pick_active(self, node: Node) -> int | None:
        eligible = [c > 0 for c in node.credits]
        cls = select_service_queue(node.qs, eligible)
        if cls is None:
            cls = select_service_queue(node.qs)
        return cls

    def _sync_entities(self, node: Node, t: int):
        """Create or retire contenders to match the node's non-empty queues."""
        burst = self.bursts.get(node.id)
        if self.per_node:
            if burst is not None:
                return
            current = node.active_class
            if current is not None and node.qs.queues[current]:
                return
            if current is not None:
                node.entities[current] = None
            cls = self._pick_active(node)
            if cls is not None:
                self._add_entity(node, cls, t)
            elif node.idle:
                self._schedule_ready(node)
            return
        removed = False
        for cls, q in enumerate(node.qs.queues):
            e = node.entities[cls]
            if e is None and q:
                self._add_entity(node, cls, t)
            elif e is not None and not q and (burst is None or burst.cls != cls):
                node.entities[cls] = None
                removed = True
        if removed and node.idle:
            self._schedule_ready(node)

    def _expire(self, node: Node, t: int) -> bool:
        removed = expired_packets(node.qs, t)
        changed = False
        for cls, pkts in enumerate(removed):
            if pkts:
                changed = True
                self.cm[cls].dropped_expired += len(pkts)
                for p in pkts:
                    self._log(t, node.id, "drop_exp", cls, p.id)
        return changed

    # -- channel access -------------------------------------------------
    def _ready(self, node: Node, t: int):
        if self._expire(node, t):
            if self.hmac:
                self._refresh_params(node)
            self._sync_entities(node, t)
        window = t + self.slot
        fired = [e for e in node.entities if e is not None and e.start + e.aifs + e.backoff < window]
        if not fired:
            if node.busy_until > t:
                self._freeze(node, t)
            else:
                self._schedule_ready(node)
            return
        qs = node.qs
        if self.hmac:
            cls = select_service_queue(qs, [c > 0 for c in node.credits])
            if cls is None:
                node.credits = list(node.params.burst_packets)
                cls = select_service_queue(qs)
            n_frames = burst_size(max(node.params.txop_limit[cls], self.tr - self.sifs), self.tr, self.sifs)
            triggers = fired
        else:
            for loser in fired[1:]:
                self._internal_collision(node, loser, t)
            cls = fired[0].cls
            n_frames = self.edca_burst[cls]
            triggers = fired[:1]
        q = qs.queues[cls]
        n_frames = min(n_frames, len(q))
        frames = [q.pop_head() for _ in range(n_frames)]
        burst = Burst(cls, frames, triggers)
        self.bursts[node.id] = burst
        self._start_frame(node, burst, t)

    def _internal_collision(self, node: Node, e: Entity, t: int):
        cls = e.cls
        self.cm[cls].collisions += 1
        self.cm[cls].transmissions += 1
        st = node.adapt[cls]
        st.collisions_this_period += 1
        st.transmissions_this_period += 1
        q = node.qs.queues[cls]
        hol = q.head
        hol.retries += 1
        self._log(t, node.id, "virt_col", cls, hol.id)
        if hol.retries >= self.retry_limit:
            q.pop_head()
            self.cm[cls].dropped_retry += 1
            self._log(t, node.id, "drop_retry", cls, hol.id)
            st.retry_k = 0
            st.cw_current = node.params.cw[cls][0]
        else:
            st.retry_k += 1
            st.cw_current = ad.grow_cw(st.cw_current, node.params.cw[cls][1])
        if not q:
            node.entities[cls] = None
        else:
            e.backoff = self._draw(node, cls)

    def _start_frame(self, node: Node, burst: Burst, t: int):
        pkt = burst.frames[burst.idx][0]
        burst.receiver = self.topology.next_hop(node.id, pkt.dest_id, pkt.remaining_hops, node.rng)
        burst.t0 = t
        end = t + self.tr
        self.air.append((node.id, t, end))
        self._log(t, node.id, "tx_start", burst.cls, pkt.id)
        limit = t + self.slot
        for w in node.neighbors:
            if w.idle and (w is node or w.ready_at >= limit):
                self._freeze(w, t)
            if end > w.busy_until:
                w.busy_until = end
                self._push(end, MEDIUM_IDLE, w.id)
        self._push(end, FRAME_END, node.id)

    def _collided(self, node: Node, receiver: int, ts: int, te: int) -> bool:
        me = node.id
        if self.single_domain:
            for w, s, e in self.air:
                if w != me and s < te and e > ts:
                    return True
            return False
        heard = {n.id for n in self.nodes[receiver].neighbors}
        for w, s, e in self.air:
            if w != me and s < te and e > ts and w in heard:
                return True
        return False

    def _frame_end(self, node: Node, t: int):
        burst = self.bursts[node.id]
        pkt, key = burst.frames[burst.idx]
        cls = burst.cls
        failed = self._collided(node, burst.receiver, burst.t0, t)
        if not failed and self.bg_p > 0 and node.rng.random() < self.bg_p:
            failed = True
        cutoff = t - self.tr
        self.air = [a for a in self.air if a[2] > cutoff]
        cm = self.cm[cls]
        st = node.adapt[cls]
        cm.transmissions += 1
        st.transmissions_this_period += 1
        if failed:
            cm.collisions += 1
            st.collisions_this_period += 1
            self._log(t, node.id, "tx_fail", cls, pkt.id)
            q = node.qs.queues[cls]
            pkt.retries += 1
            dropped = pkt.retries >= self.retry_limit
            if dropped:
                cm.dropped_retry += 1
                self._log(t, node.id, "drop_retry", cls, pkt.id)
            else:
                q.restore(pkt, key)
            for p, k in burst.frames[burst.idx + 1:]:
                q.restore(p, k)
            self._end_burst(node, burst, t, failed=True, retry_dropped=dropped)
            return
        self._log(t, node.id, "tx_ok", cls, pkt.id)
        if self.hmac:
            node.credits[cls] -= 1
        self._deliver_or_forward(pkt, burst.receiver, t)
        burst.idx += 1
        if burst.idx < len(burst.frames):
            self._start_frame(node, burst, t)
        else:
            self._end_burst(node, burst, t, failed=False, retry_dropped=False)

    def _end_burst(self, node: Node, burst: Burst, t: int, failed: bool, retry_dropped: bool):
        del self.bursts[node.id]
        cls = burst.cls
        if self.hmac:
            self._refresh_params(node)
        st = node.adapt[cls]
        lo, hi = node.params.cw[cls]
        if failed and not retry_dropped:
            st.retry_k += 1
            st.cw_current = ad.grow_cw(st.cw_current, hi)
        else:
            st.retry_k = 0
            st.cw_current = lo
        if self.per_node:
            # contend next with the parameters of the now most urgent queue
            node.entities = [None] * NUM_CLASSES
            nxt = self._pick_active(node)
            if nxt is not None:
                e = Entity(nxt)
                e.backoff = self._draw(node, nxt)
                node.entities[nxt] = e
            return
        retire = {e.cls for e in burst.triggers} | {cls}
        for c in sorted(retire):
            e = node.entities[c]
            if e is None:
                continue
            if not node.qs.queues[c]:
                node.entities[c] = None
            else:
                e.backoff = self._draw(node, c)
        # queues that gained packets while their contender was parked
        for c, q in enumerate(node.qs.queues):
            if q and node.entities[c] is None:
                e = Entity(c)
                e.backoff = self._draw(node, c)
                node.entities[c] = e

    # -- traffic --------------------------------------------------------
    def _deliver_or_forward(self, pkt, receiver: int, t: int):
        record_hop_arrival(pkt, t)
        cls = pkt.service_class
        cm = self.cm[cls]
        if is_expired(pkt):
            cm.dropped_expired += 1
            self._log(t, receiver, "drop_exp", cls, pkt.id)
            return
        if pkt.remaining_hops == 0:
            cm.delivered += 1
            cm.bits_delivered += pkt.payload_bits
            cm.sum_end_to_end_delay += t - pkt.generation_time
            self._log(t, receiver, "deliver", cls, pkt.id)
            return
        self._enqueue(self.nodes[receiver], pkt, t)

    def _enqueue(self, node: Node, pkt, t: int):
        cls = pkt.service_class
        qs = node.qs
        was_empty = not qs.queues[cls]
        accepted = enqueue(qs, pkt)
        if qs.evicted:
            for p in qs.evicted:
                self.cm[p.service_class].dropped_tail += 1
                self._log(t, node.id, "drop_tail", p.service_class, p.id)
            qs.evicted.clear()
        if not accepted:
            self.cm[cls].dropped_tail += 1
            self._log(t, node.id, "drop_tail", cls, pkt.id)
            return
        self._log(t, node.id, "enq", cls, pkt.id)
        if was_empty:
            if self.hmac:
                self._refresh_params(node)
            self._sync_entities(node, t)

    def _arrival(self, node: Node, t: int):
        cfg = self.cfg
        traffic = cfg.traffic
        gap = next_arrival_gap(traffic, node.rng)
        if gap is not None and t + gap < self.duration:
            self._push(t + gap, ARRIVAL, node.id)
        topo = self.topology
        hops = dest = None
        if topo.mode == "geometric":
            reachable = topo.reachable(node.id, traffic.hop_max)
            if not reachable:
                return
            dest = reachable[node.rng.randrange(len(reachable))]
            hops = max(topo.hops(node.id, dest), traffic.hop_min)
        pkt = generate_packet(node.id, t, traffic, node.rng, cfg.node_count, self.lifetime_unit,
                              cfg.phy.mpdu_bits, next(self._pid), hops, dest)
        cls = pkt.service_class
        self.cm[cls].generated += 1
        self._log(t, node.id, "gen", cls, pkt.id)
        self._enqueue(node, pkt, t)

    def _adapt(self, t: int):
        cfg = self.cfg
        for node in self.nodes:
            self._expire(node, t)
            for st in node.adapt:
                ad.update_collision_ewma(st, cfg.alpha)
            if self.hmac:
                self._refresh_params(node)
                node.credits = list(node.params.burst_packets)
            self._sync_entities(node, t)
            if node.idle:
                self._schedule_ready(node)
        nxt = t + cfg.t_up
        if nxt < self.duration:
            self._push(nxt, ADAPT)

    # -- wrap-up --------------------------------------------------------
    def _finish(self):
        for node in self.nodes:
            for cls, q in enumerate(node.qs.queues):
                self.cm[cls].in_flight += len(q)
        for burst in self.bursts.values():
            self.cm[burst.cls].in_flight += len(burst.frames) - burst.idx
        ratios = [m.collisions / m.transmissions for m in self.cm if m.transmissions]
        a_col = sum(ratios) / len(ratios) if ratios else 0.0
        self.metrics.measured_a_col = a_col
        met = scenario_target_met(self.cfg.scenario, a_col, self.cfg.t_col)
        self.metrics.scenario_target_met = met
        if not met and self.duration > 0:
            log.warning("scenario %d target not met: measured A_col=%.3f (protocol=%s, nodes=%d, seed=%d)",
                        self.cfg.scenario, a_col, self.cfg.protocol, self.cfg.node_count, self.cfg.seed)


def run(config: SimConfig) -> RunMetrics:
    """Execute one simulation run to ``config.duration`` and return its metrics."""
    return Simulation(config).run()
