"""Store layout graph: nodes, weighted edges, shortest paths, cost matrices.

The store is a sparse undirected graph. Node 0 is the entrance where
shopping paths start; the highest-numbered node is the order preparation
zone where picker routes start and end. All costs come from edge lengths
(or node traffic), never from coordinates; coordinates are metadata for
generation and plotting only.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np


class NodeKind(str, Enum):
    ENTRANCE = "entrance"
    EXIT = "exit"
    INTERSECTION = "intersection"
    PRODUCT = "product_position"
    PREP_ZONE = "prep_zone"


@dataclass(frozen=True)
class StoreNode:
    id: int
    kind: NodeKind
    x: float = 0.0
    y: float = 0.0


class NoPathError(Exception):
    """Raised when a requested target is unreachable (invalid layout)."""


class GraphError(Exception):
    """Raised for malformed graph construction or queries."""


# weight function: (u, v, length) -> cost of traversing arc u->v
WeightFn = Callable[[int, int, float], float]


class StoreGraph:
    """Immutable undirected weighted graph of store locations.

    Adjacency lists are kept sorted by neighbor id so that every
    iteration order (and therefore every tie-break) is reproducible.
    """

    def __init__(
        self,
        nodes: Iterable[StoreNode],
        edges: Iterable[tuple[int, int, float]],
        products: dict[str, int] | None = None,
    ):
        self.nodes: dict[int, StoreNode] = {}
        for n in nodes:
            if n.id < 0:
                raise GraphError(f"negative node id {n.id}")
            if n.id in self.nodes:
                raise GraphError(f"duplicate node id {n.id}")
            self.nodes[n.id] = n
        self._adj: dict[int, dict[int, float]] = {u: {} for u in self.nodes}
        for u, v, length in edges:
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if u not in self.nodes or v not in self.nodes:
                raise GraphError(f"edge ({u},{v}) references unknown node")
            if not length > 0:
                raise GraphError(f"edge ({u},{v}) has non-positive length {length}")
            self._adj[u][v] = float(length)
            self._adj[v][u] = float(length)
        self._neighbors: dict[int, tuple[int, ...]] = {
            u: tuple(sorted(nbrs)) for u, nbrs in self._adj.items()
        }
        self.products: dict[str, int] = dict(products or {})

    # -- basic queries ---------------------------------------------------

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self._neighbors[u]

    def edge_length(self, u: int, v: int) -> float:
        try:
            return self._adj[u][v]
        except KeyError:
            raise GraphError(f"no edge between {u} and {v}") from None

    def edges(self) -> list[tuple[int, int, float]]:
        return [
            (u, v, self._adj[u][v])
            for u in sorted(self._adj)
            for v in self._neighbors[u]
            if u < v
        ]

    def nodes_of_kind(self, kind: NodeKind) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.kind == kind)

    @property
    def entrance(self) -> int:
        ids = self.nodes_of_kind(NodeKind.ENTRANCE)
        if not ids:
            raise GraphError("graph has no entrance node")
        return ids[0]

    @property
    def prep_zone(self) -> int:
        ids = self.nodes_of_kind(NodeKind.PREP_ZONE)
        if not ids:
            raise GraphError("graph has no prep_zone node")
        return ids[0]

    @property
    def product_nodes(self) -> list[int]:
        return self.nodes_of_kind(NodeKind.PRODUCT)

    @property
    def exit_nodes(self) -> list[int]:
        return self.nodes_of_kind(NodeKind.EXIT)


def length_weight(u: int, v: int, length: float) -> float:
    return length


def traffic_weight(node_traffic: dict[int, float]) -> WeightFn:
    """Arc cost = average customer traffic at the arc's destination node.

    Summing destination traffic along a path charges every visited node
    except the origin exactly once.
    """

    def fn(u: int, v: int, length: float) -> float:
        return float(node_traffic.get(v, 0.0))

    return fn


def shortest_path(
    graph: StoreGraph,
    src: int,
    dst: int,
    weight: WeightFn = length_weight,
) -> tuple[float, list[int]]:
    """Minimal-cost path from src to dst inclusive of both endpoints.

    Ties between equal-cost paths are broken by the lexicographically
    smallest node-id sequence, so results are reproducible.
    """
    if src not in graph or dst not in graph:
        raise GraphError(f"unknown node in query ({src}, {dst})")
    if src == dst:
        return 0.0, [src]
    # Heap entries carry the full path tuple: comparing (cost, path) gives
    # the lexicographic tie-break for free. Fine at store-graph sizes.
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (src,))]
    done: set[int] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        if u == dst:
            return cost, list(path)
        done.add(u)
        for v in graph.neighbors(u):
            if v in done:
                continue
            w = weight(u, v, graph.edge_length(u, v))
            if w < 0:
                raise GraphError(f"negative arc weight on ({u},{v})")
            heapq.heappush(heap, (cost + w, path + (v,)))
    raise NoPathError(f"no path from {src} to {dst}")


def single_source_costs(
    graph: StoreGraph, src: int, weight: WeightFn = length_weight
) -> dict[int, float]:
    """Minimal path cost from src to every reachable node (no paths kept)."""
    if src not in graph:
        raise GraphError(f"unknown node {src}")
    dist = {src: 0.0}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v in graph.neighbors(u):
            w = weight(u, v, graph.edge_length(u, v))
            if w < 0:
                raise GraphError(f"negative arc weight on ({u},{v})")
            nd = d + w
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


@dataclass
class CostMatrix:
    """Pairwise path costs over a subset of picking-relevant nodes."""

    basis: str  # "arc_distance" or "arc_crowdedness"
    node_ids: tuple[int, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self._index = {n: i for i, n in enumerate(self.node_ids)}

    def cost(self, u: int, v: int) -> float:
        return float(self.values[self._index[u], self._index[v]])


def _pairwise_matrix(
    graph: StoreGraph, nodes: Sequence[int], weight: WeightFn, basis: str
) -> CostMatrix:
    ids = tuple(nodes)
    n = len(ids)
    values = np.zeros((n, n))
    for i, u in enumerate(ids):
        costs = single_source_costs(graph, u, weight)
        for j, v in enumerate(ids):
            if i != j:
                if v not in costs:
                    raise NoPathError(f"no path from {u} to {v}")
                values[i, j] = costs[v]
    return CostMatrix(basis=basis, node_ids=ids, values=values)


def distance_matrix(graph: StoreGraph, nodes: Sequence[int]) -> CostMatrix:
    """Shortest-path length (meters) between every pair of given nodes."""
    return _pairwise_matrix(graph, nodes, length_weight, "arc_distance")


def crowdedness_matrix(
    graph: StoreGraph, node_traffic: dict[int, float], nodes: Sequence[int]
) -> CostMatrix:
    """Minimal summed node traffic between every pair of given nodes.

    The cost of a path counts the traffic of every visited node except
    the origin (interior nodes plus the destination).
    """
    for node, t in node_traffic.items():
        if t < 0:
            raise GraphError(f"negative traffic at node {node}")
    return _pairwise_matrix(graph, nodes, traffic_weight(node_traffic), "arc_crowdedness")


def validate(graph: StoreGraph) -> list[str]:
    """Check structural invariants; returns a list of violations (empty = valid)."""
    issues: list[str] = []
    entrances = graph.nodes_of_kind(NodeKind.ENTRANCE)
    if len(entrances) != 1:
        issues.append(f"expected exactly one entrance node, found {len(entrances)}")
    if not graph.nodes_of_kind(NodeKind.PREP_ZONE):
        issues.append("no prep_zone node")
    if not graph.nodes_of_kind(NodeKind.EXIT) and not graph.nodes_of_kind(NodeKind.PREP_ZONE):
        issues.append("no exit or prep_zone node")
    if entrances and entrances[0] != min(graph.nodes):
        issues.append(f"entrance node {entrances[0]} is not the lowest node id")
    # connectivity via BFS from an arbitrary node
    if graph.nodes:
        start = next(iter(sorted(graph.nodes)))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in graph.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        for u in sorted(graph.nodes):
            if u not in seen:
                issues.append(f"node {u} is unreachable from node {start}")
    return issues


# -- layout file format ---------------------------------------------------


def save_layout(graph: StoreGraph, path: str) -> None:
    data = {
        "nodes": [
            {"id": n.id, "x": n.x, "y": n.y, "kind": n.kind.value}
            for n in (graph.nodes[i] for i in sorted(graph.nodes))
        ],
        "edges": [{"u": u, "v": v, "length": length} for u, v, length in graph.edges()],
        "products": [
            {"sku": sku, "node": node} for sku, node in sorted(graph.products.items())
        ],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def load_layout(path: str) -> StoreGraph:
    """Load a layout file, rejecting anything that fails validate()."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        nodes = [
            StoreNode(id=int(n["id"]), kind=NodeKind(n["kind"]), x=float(n["x"]), y=float(n["y"]))
            for n in data["nodes"]
        ]
        edges = [(int(e["u"]), int(e["v"]), float(e["length"])) for e in data["edges"]]
        products = {str(p["sku"]): int(p["node"]) for p in data.get("products", [])}
    except (KeyError, ValueError, TypeError) as exc:
        raise GraphError(f"malformed layout file {path}: {exc}") from exc
    graph = StoreGraph(nodes, edges, products)
    issues = validate(graph)
    if issues:
        raise GraphError(f"invalid layout {path}: " + "; ".join(issues))
    return graph
