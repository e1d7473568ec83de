"""Node placement, connectivity and next-hop selection."""

from __future__ import annotations

import math
import random

import networkx as nx


class Topology:
    """Connectivity between nodes.

    In abstract mode every relay is drawn uniformly from the other nodes and
    the hop count is a per-packet parameter. In geometric mode nodes sit at
    uniform random positions in the area, links exist within ``tx_range`` and
    packets follow a precomputed shortest path.
    """

    def __init__(self, node_count: int, mode: str, area=(1000.0, 1000.0),
                 tx_range: float = 250.0, rng: random.Random | None = None,
                 place: bool = False):
        self.node_count = node_count
        self.mode = mode
        self.tx_range = tx_range
        self.positions = None
        self.graph = None
        self.paths = None
        self.distances = None
        rng = rng or random.Random(0)
        if mode == "geometric" or place:
            w, h = area
            self.positions = [(rng.uniform(0, w), rng.uniform(0, h)) for _ in range(node_count)]
            g = nx.Graph()
            g.add_nodes_from(range(node_count))
            for i in range(node_count):
                xi, yi = self.positions[i]
                for j in range(i + 1, node_count):
                    xj, yj = self.positions[j]
                    if math.hypot(xi - xj, yi - yj) <= tx_range:
                        g.add_edge(i, j)
            self.graph = g
        if mode == "geometric":
            self.paths = dict(nx.all_pairs_shortest_path(self.graph))
            self.distances = {s: {d: len(p) - 1 for d, p in ps.items()} for s, ps in self.paths.items()}

    def neighbors(self, node: int) -> list[int]:
        """Nodes whose transmissions ``node`` can hear (including itself)."""
        if self.graph is None:
            return list(range(self.node_count))
        return sorted(set(self.graph.neighbors(node)) | {node})

    def reachable(self, source: int, max_hops: int) -> list[int]:
        dist = self.distances[source]
        return sorted(d for d, h in dist.items() if 0 < h <= max_hops)

    def hops(self, source: int, dest: int) -> int:
        return self.distances[source][dest]

    def next_hop(self, current: int, dest: int, remaining_hops: int, rng: random.Random) -> int:
        if remaining_hops <= 1:
            return dest
        if self.mode == "geometric":
            return self.paths[current][dest][1]
        n = self.node_count
        if n <= 2:
            # nobody but the endpoints to relay through
            return dest if dest != current else (current + 1) % n
        while True:
            r = rng.randrange(n)
            if r != current and r != dest:
                return r
