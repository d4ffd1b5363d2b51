"""Synthetic benchmark instances: grid-aisle layouts, customer
concentration profiles, shopping-list sampling, and the 12-instance set.

Layouts are rectangular aisle grids: vertical aisles carry two product
nodes per block (between consecutive cross-aisles), cross-aisles connect
the aisle tops/bottoms. Node 0 is the entrance at the front-left; the
prep zone gets the highest node id at the back-right.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .env import EnvConfig, RewardWeights
from .graph import NodeKind, StoreGraph, StoreNode

MAX_LIST_LENGTH = 10

SIZE_GRID = {  # size -> (aisle columns, blocks per aisle)
    "tiny": (3, 2),
    "small": (4, 3),
    "medium": (6, 4),
    "large": (8, 6),
}
SIZES = tuple(SIZE_GRID)
CONCENTRATIONS = ("entrance", "middle", "back")

AISLE_SPACING = 5.0  # meters between adjacent aisles
BLOCK_LENGTH = 9.0  # meters between consecutive cross-aisles
DOOR_LENGTH = 2.0  # stub edges to entrance/exit/prep nodes
PRODUCTS_PER_BLOCK = 2
PROFILE_DECAY = 0.5  # sampling-weight decay per intersection hop


@dataclass
class LayoutSpec:
    size: str
    aisle_cols: int
    aisle_rows: int  # blocks per aisle
    products_per_block: int = PRODUCTS_PER_BLOCK

    @classmethod
    def for_size(cls, size: str) -> "LayoutSpec":
        if size not in SIZE_GRID:
            raise ValueError(f"unknown layout size {size!r}")
        cols, rows = SIZE_GRID[size]
        return cls(size=size, aisle_cols=cols, aisle_rows=rows)


def generate_layout(spec: LayoutSpec, seed: int = 0) -> StoreGraph:
    """Build the grid-aisle store graph for a layout spec.

    Construction is fully deterministic; the seed parameter is accepted
    for interface symmetry with the samplers.
    """
    if spec.aisle_cols < 2 or spec.aisle_rows < 1:
        raise ValueError("layout needs at least 2 aisles and 1 block")
    nodes: list[StoreNode] = []
    edges: list[tuple[int, int, float]] = []
    products: dict[str, int] = {}
    next_id = 1  # id 0 reserved for the entrance

    def add(kind: NodeKind, x: float, y: float) -> int:
        nonlocal next_id
        node_id = next_id
        next_id += 1
        nodes.append(StoreNode(id=node_id, kind=kind, x=x, y=y))
        return node_id

    cols, rows = spec.aisle_cols, spec.aisle_rows
    inter: dict[tuple[int, int], int] = {}
    for r in range(rows + 1):
        for c in range(cols):
            inter[(r, c)] = add(NodeKind.INTERSECTION, c * AISLE_SPACING, r * BLOCK_LENGTH)
    # cross-aisle edges along every intersection row
    for r in range(rows + 1):
        for c in range(cols - 1):
            edges.append((inter[(r, c)], inter[(r, c + 1)], AISLE_SPACING))
    # aisle blocks, each subdivided by product nodes
    seg = BLOCK_LENGTH / (spec.products_per_block + 1)
    for c in range(cols):
        for r in range(rows):
            prev = inter[(r, c)]
            for p in range(spec.products_per_block):
                y = r * BLOCK_LENGTH + (p + 1) * seg
                prod = add(NodeKind.PRODUCT, c * AISLE_SPACING, y)
                products[f"P{prod:04d}"] = prod
                edges.append((prev, prod, seg))
                prev = prod
            edges.append((prev, inter[(r + 1, c)], seg))

    # entrance (node 0) at the front-left, exits along the front,
    # prep zone at the back-right with the highest id
    nodes.append(StoreNode(id=0, kind=NodeKind.ENTRANCE, x=-DOOR_LENGTH, y=0.0))
    edges.append((0, inter[(0, 0)], DOOR_LENGTH))
    exit_cols = sorted({cols // 2, cols - 1})
    for c in exit_cols:
        ex = add(NodeKind.EXIT, c * AISLE_SPACING, -DOOR_LENGTH)
        edges.append((ex, inter[(0, c)], DOOR_LENGTH))
    prep = add(NodeKind.PREP_ZONE, (cols - 1) * AISLE_SPACING + DOOR_LENGTH, rows * BLOCK_LENGTH)
    edges.append((prep, inter[(rows, cols - 1)], DOOR_LENGTH))
    return StoreGraph(nodes, edges, products)


def _hop_distances(graph: StoreGraph, anchor: int) -> dict[int, int]:
    dist = {anchor: 0}
    queue = deque([anchor])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass
class ConcentrationProfile:
    """Sampling weights over product nodes, decaying with hop distance
    from an anchor region (entrance, middle, or back of the store)."""

    mode: str
    product_nodes: tuple[int, ...]
    weights: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, graph: StoreGraph, mode: str) -> "ConcentrationProfile":
        if mode not in CONCENTRATIONS:
            raise ValueError(f"unknown concentration mode {mode!r}")
        prod = tuple(graph.product_nodes)
        if not prod:
            raise ValueError("graph has no product nodes")
        if mode == "entrance":
            anchor = graph.entrance
        elif mode == "back":
            # far corner: the node maximizing hop distance from the entrance
            hops = _hop_distances(graph, graph.entrance)
            anchor = max(sorted(graph.nodes), key=lambda n: hops.get(n, -1))
        else:
            xs = [graph.nodes[n].x for n in graph.nodes]
            ys = [graph.nodes[n].y for n in graph.nodes]
            cx, cy = (min(xs) + max(xs)) / 2, (min(ys) + max(ys)) / 2
            anchor = min(
                sorted(graph.nodes),
                key=lambda n: (graph.nodes[n].x - cx) ** 2 + (graph.nodes[n].y - cy) ** 2,
            )
        hops = _hop_distances(graph, anchor)
        raw = np.array([PROFILE_DECAY ** hops[n] for n in prod])
        return cls(mode=mode, product_nodes=prod, weights=raw / raw.sum())

    def uniform(self) -> "ConcentrationProfile":
        w = np.full(len(self.product_nodes), 1.0 / len(self.product_nodes))
        return ConcentrationProfile(mode=self.mode, product_nodes=self.product_nodes, weights=w)


def sample_shopping_list(
    profile: ConcentrationProfile, rng: np.random.Generator
) -> list[int]:
    """Distinct product nodes, 1..10 of them, drawn by profile weight;
    visiting order is random."""
    n_max = min(MAX_LIST_LENGTH, len(profile.product_nodes))
    n = int(rng.integers(1, n_max + 1))
    # weighted sampling without replacement via exponential sort keys
    keys = rng.exponential(size=len(profile.product_nodes)) / profile.weights
    picks = np.argsort(keys)[:n]
    return [int(profile.product_nodes[i]) for i in picks]


@dataclass
class InstanceConfig:
    name: str
    size: str
    concentration: str
    layout_spec: LayoutSpec
    env_config: EnvConfig

    def make_graph(self, seed: int = 0) -> StoreGraph:
        return generate_layout(self.layout_spec, seed)


def table_defaults() -> EnvConfig:
    """The benchmark's shared simulation constants."""
    return EnvConfig(
        customer_arrival_rate=2.0,
        order_arrival_rate=0.2,
        open_time=8 * 3600.0,
        store_capacity=50,
        node_capacity=5,
        customer_speed=1.0,
        picker_speed=1.0,
        customer_service_time=30.0,
        picker_service_time=30.0,
        reward_weights=RewardWeights(step=1.0, same_node=3.0, visible=1.0, pick=100.0),
    )


def build_benchmark() -> list[InstanceConfig]:
    """All 12 size x concentration combinations with shared constants."""
    configs = []
    for size in SIZES:
        for concentration in CONCENTRATIONS:
            configs.append(
                InstanceConfig(
                    name=f"{size}-{concentration}",
                    size=size,
                    concentration=concentration,
                    layout_spec=LayoutSpec.for_size(size),
                    env_config=table_defaults(),
                )
            )
    return configs
