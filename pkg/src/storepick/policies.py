"""Step policies for the picker: QL, SP, MP, and CN.

All four emit a graph-adjacent move toward the current target; they
differ in how they weigh distance against observed or historical
customer presence. SP and CN descend a cached cost-to-target field so
each step is O(neighbors) instead of a full search.
"""

from __future__ import annotations

import heapq
from typing import Callable, Protocol

import numpy as np

from .env import Environment, Observation
from .graph import StoreGraph
from .qlearning import QTable, select_action

Cost = tuple[float, float]  # lexicographic (primary cost, path length)


class Policy(Protocol):
    name: str

    def next_action(self, obs: Observation) -> int: ...


class _CostField:
    """Cost-to-target fields under a lexicographic (primary, length) arc
    cost, one Dijkstra per distinct target, cached.

    The secondary length component makes descent well-defined even when
    the primary cost ties everywhere (e.g. zero traffic): among equally
    quiet moves the picker still walks toward the target.
    """

    def __init__(self, graph: StoreGraph, primary: Callable[[int, int, float], float]):
        self.graph = graph
        self.primary = primary
        self._fields: dict[int, dict[int, Cost]] = {}

    def arc(self, u: int, v: int) -> Cost:
        length = self.graph.edge_length(u, v)
        return (self.primary(u, v, length), length)

    def to_target(self, target: int) -> dict[int, Cost]:
        field = self._fields.get(target)
        if field is None:
            # search outward from the target, relaxing the forward arc v->u
            field = {target: (0.0, 0.0)}
            heap: list[tuple[Cost, int]] = [((0.0, 0.0), target)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > field[u]:
                    continue
                for v in self.graph.neighbors(u):
                    w = self.arc(v, u)
                    nd = (d[0] + w[0], d[1] + w[1])
                    if nd < field.get(v, (float("inf"), float("inf"))):
                        field[v] = nd
                        heapq.heappush(heap, (nd, v))
            self._fields[target] = field
        return field

    def descend(self, node: int, target: int) -> int:
        """Smallest-id neighbor on a cost-optimal path to the target."""
        field = self.to_target(target)
        best: tuple[Cost, int] | None = None
        for v in self.graph.neighbors(node):
            w = self.arc(node, v)
            through = (w[0] + field[v][0], w[1] + field[v][1])
            if best is None or (through, v) < best:
                best = (through, v)
        assert best is not None
        return best[1]


def _length_primary(u: int, v: int, length: float) -> float:
    return length


def _traffic_primary(node_traffic: dict[int, float]) -> Callable[[int, int, float], float]:
    def fn(u: int, v: int, length: float) -> float:
        return float(node_traffic.get(v, 0.0))

    return fn


class ShortestPathPolicy:
    """First step of the distance-weighted shortest path to the target."""

    name = "sp"

    def __init__(self, graph: StoreGraph):
        self.graph = graph
        self._field = _CostField(graph, _length_primary)

    def next_action(self, obs: Observation) -> int:
        return self._field.descend(obs.picker_node, obs.target_node)


class CrowdedNodesPolicy:
    """First step of the traffic-weighted shortest path to the target,
    using a calibrated static node-traffic profile."""

    name = "cn"

    def __init__(self, graph: StoreGraph, node_traffic: dict[int, float]):
        self.graph = graph
        self._field = _CostField(graph, _traffic_primary(node_traffic))

    def next_action(self, obs: Observation) -> int:
        return self._field.descend(obs.picker_node, obs.target_node)


class MyopicPolicy:
    """Among neighbors strictly closer to the target, take the one with
    the fewest observed customers; break ties by distance then node id."""

    name = "mp"

    def __init__(self, graph: StoreGraph):
        self.graph = graph
        self._field = _CostField(graph, _length_primary)

    def next_action(self, obs: Observation) -> int:
        field = self._field.to_target(obs.target_node)
        here = field[obs.picker_node]
        closer = [v for v in self.graph.neighbors(obs.picker_node) if field[v] < here]
        if not closer:  # only if already at the target; fall back to SP move
            return self._field.descend(obs.picker_node, obs.target_node)
        return min(
            closer, key=lambda v: (obs.neighbor_customers.get(v, 0), field[v], v)
        )


class QLearningPolicy:
    """Table lookup with evaluation-time epsilon exploration."""

    name = "ql"

    def __init__(self, graph: StoreGraph, qtable: QTable, epsilon: float, rng: np.random.Generator):
        self.graph = graph
        self.qtable = qtable
        self.epsilon = epsilon
        self.rng = rng

    def next_action(self, obs: Observation) -> int:
        state = (obs.picker_node, obs.target_node)
        return select_action(
            self.qtable, state, self.graph.neighbors(obs.picker_node), self.epsilon, self.rng
        )


def calibrate_traffic(
    make_env: Callable[[], Environment],
    episodes: int = 50,
    seed: int = 0,
    sample_interval: float = 10.0,
) -> dict[int, float]:
    """Average customers per node from customer-only simulation runs.

    The picker never moves, so the measurements are free of picker
    influence. Occupancy is sampled on a fixed grid of instants and
    averaged per node over all samples and episodes.
    """
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    totals: dict[int, float] = {}
    samples = 0
    for ep in range(episodes):
        env = make_env()
        env.reset([seed, ep])
        ticks = int(env.config.open_time // sample_interval)
        for _ in range(ticks):
            env.advance(sample_interval)
            for node, count in env.occupancy.items():
                if count:
                    totals[node] = totals.get(node, 0.0) + count
            samples += 1
    return {node: total / samples for node, total in sorted(totals.items())}
