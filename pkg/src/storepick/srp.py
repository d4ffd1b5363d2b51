"""Exact sequencing of one order's picking locations (open-path TSP).

Given a cost matrix over {start depot} ∪ picking set ∪ {end depot}, find
the cheapest visiting order from start to end. The production solver is
a cutting-plane loop: solve a degree-constrained assignment model, split
the chosen arcs into connected components, and add subtour-elimination
cuts until a single component spans all nodes. Two independent oracles
(subset DP and permutation enumeration) verify it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linear_sum_assignment, milp

from .graph import CostMatrix, StoreGraph, crowdedness_matrix, distance_matrix

ORACLE_DP_MAX = 15
ORACLE_ENUM_MAX = 9


class SrpSizeError(Exception):
    """Instance too large for the requested exact oracle."""


@dataclass
class SrpInstance:
    """Sequencing instance: node 0 of `nodes` is the start depot, the last
    node is the end depot, everything in between must be visited once."""

    nodes: tuple[int, ...]
    costs: np.ndarray

    def __post_init__(self):
        if len(self.nodes) < 3:
            raise ValueError("instance needs a start depot, one pick, and an end depot")
        if self.costs.shape != (len(self.nodes), len(self.nodes)):
            raise ValueError("cost matrix shape does not match node count")
        if not np.all(np.isfinite(self.costs)):
            raise ValueError("cost matrix has non-finite entries")

    @property
    def picks(self) -> tuple[int, ...]:
        return self.nodes[1:-1]


@dataclass
class SrpSolution:
    sequence: list[int]  # start depot, permutation of picks, end depot
    cost: float


def build_instance(
    graph: StoreGraph,
    picking_locations: list[int],
    basis: str = "arc_distance",
    node_traffic: dict[int, float] | None = None,
    start: int | None = None,
    end: int | None = None,
) -> SrpInstance:
    """Cost matrix over start depot + picking set + end depot.

    Defaults route from the entrance (node 0) to the prep zone; the
    simulator overrides both with the picker's station.
    """
    if not picking_locations:
        raise ValueError("picking set is empty")
    start = graph.entrance if start is None else start
    end = graph.prep_zone if end is None else end
    for node in picking_locations:
        if node not in graph:
            raise ValueError(f"picking location {node} not in graph")
    picks = sorted(set(picking_locations))
    query_nodes = [start] + picks + [end]
    if basis == "arc_distance":
        matrix = distance_matrix(graph, sorted(set(query_nodes)))
    elif basis == "arc_crowdedness":
        matrix = crowdedness_matrix(graph, node_traffic or {}, sorted(set(query_nodes)))
    else:
        raise ValueError(f"unknown routing basis {basis!r}")
    n = len(query_nodes)
    costs = np.zeros((n, n))
    for i, u in enumerate(query_nodes):
        for j, v in enumerate(query_nodes):
            if i != j and u != v:
                costs[i, j] = matrix.cost(u, v)
    return SrpInstance(nodes=tuple(query_nodes), costs=costs)


def instance_from_matrix(
    matrix: CostMatrix, picking_locations: list[int], start: int, end: int
) -> SrpInstance:
    """Build an instance from a precomputed cost matrix (no graph queries)."""
    picks = sorted(set(picking_locations))
    query_nodes = [start] + picks + [end]
    n = len(query_nodes)
    costs = np.zeros((n, n))
    for i, u in enumerate(query_nodes):
        for j, v in enumerate(query_nodes):
            if i != j and u != v:
                costs[i, j] = matrix.cost(u, v)
    return SrpInstance(nodes=tuple(query_nodes), costs=costs)


def make_sequencer(
    graph: StoreGraph,
    basis: str = "arc_distance",
    node_traffic: dict[int, float] | None = None,
):
    """Order sequencing function for the simulator.

    Precomputes the cost matrix over all picking-relevant nodes (products
    plus depots) once, then solves each order with the cutting-plane
    solver. Results are memoized per picking set.
    """
    relevant = sorted({*graph.product_nodes, graph.entrance, graph.prep_zone})
    if basis == "arc_distance":
        matrix = distance_matrix(graph, relevant)
    elif basis == "arc_crowdedness":
        matrix = crowdedness_matrix(graph, node_traffic or {}, relevant)
    else:
        raise ValueError(f"unknown routing basis {basis!r}")
    cache: dict[tuple, list[int]] = {}

    def sequencer(picking_locations: list[int], start: int, end: int) -> list[int]:
        picks = sorted(set(picking_locations))
        key = (tuple(picks), start, end)
        if key not in cache:
            if len(picks) == 1:
                cache[key] = picks
            else:
                instance = instance_from_matrix(matrix, picks, start, end)
                cache[key] = solve_cutting_planes(instance).sequence[1:-1]
        return list(cache[key])

    sequencer.basis = basis  # type: ignore[attr-defined]
    return sequencer


def _sequence_cost(instance: SrpInstance, order: tuple[int, ...]) -> float:
    """Cost of visiting picks in positional order (indices into instance.nodes)."""
    n = len(instance.nodes)
    idx = [0, *order, n - 1]
    return float(sum(instance.costs[a, b] for a, b in zip(idx, idx[1:])))


def solve_oracle(instance: SrpInstance, method: str = "auto") -> SrpSolution:
    """Provably optimal sequence via subset DP or permutation enumeration.

    Independent of the cutting-plane path; used to verify it. Ties break
    to the lexicographically smallest sequence of node ids.
    """
    k = len(instance.nodes) - 2
    if method == "auto":
        method = "enumerate" if k <= ORACLE_ENUM_MAX else "held_karp"
    if method == "enumerate":
        if k > ORACLE_ENUM_MAX:
            raise SrpSizeError(f"{k} picks exceeds enumeration limit {ORACLE_ENUM_MAX}")
        return _solve_enumerate(instance)
    if method == "held_karp":
        if k > ORACLE_DP_MAX:
            raise SrpSizeError(f"{k} picks exceeds DP limit {ORACLE_DP_MAX}")
        return _solve_dp(instance)
    raise ValueError(f"unknown oracle method {method!r}")


def _solve_enumerate(instance: SrpInstance) -> SrpSolution:
    k = len(instance.nodes) - 2
    best_cost = float("inf")
    best_order: tuple[int, ...] | None = None
    # positions 1..k sorted by node id, so itertools yields candidate
    # sequences in lexicographic node-id order and first-win = smallest
    positions = sorted(range(1, k + 1), key=lambda i: instance.nodes[i])
    for order in itertools.permutations(positions):
        cost = _sequence_cost(instance, order)
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_order = order
    assert best_order is not None
    sequence = [instance.nodes[0], *(instance.nodes[i] for i in best_order), instance.nodes[-1]]
    return SrpSolution(sequence=sequence, cost=best_cost)


def _solve_dp(instance: SrpInstance) -> SrpSolution:
    """Held–Karp over subsets of picks for the open path start -> end.

    The table stores cheapest continuations, so the sequence can be
    rebuilt front-to-back greedily, always taking the smallest node id
    that still achieves the optimum (lexicographic tie-break).
    """
    k = len(instance.nodes) - 2
    c = instance.costs
    full = (1 << k) - 1
    INF = float("inf")
    end = k + 1
    # g[mask][j] = cheapest path from pick j through every pick in mask
    # (j not in mask) and on to the end depot
    g = [[INF] * k for _ in range(1 << k)]
    for j in range(k):
        g[0][j] = c[j + 1, end]
    for mask in range(1, full + 1):
        row = g[mask]
        for j in range(k):
            if mask & (1 << j):
                continue
            best = INF
            rest = mask
            while rest:
                b = rest & -rest
                i = b.bit_length() - 1
                cand = c[j + 1, i + 1] + g[mask ^ b][i]
                if cand < best:
                    best = cand
                rest ^= b
            row[j] = best
    total = min(c[0, j + 1] + g[full ^ (1 << j)][j] for j in range(k))
    order_by_id = sorted(range(k), key=lambda i: instance.nodes[i + 1])
    seq_idx: list[int] = []
    mask = full
    prev: int | None = None
    acc = 0.0
    tol = 1e-9 * max(1.0, abs(total))
    for _ in range(k):
        for j in order_by_id:
            if not mask & (1 << j):
                continue
            step = c[0, j + 1] if prev is None else c[prev + 1, j + 1]
            if acc + step + g[mask ^ (1 << j)][j] <= total + tol:
                acc += step
                mask ^= 1 << j
                seq_idx.append(j + 1)
                prev = j
                break
    sequence = [instance.nodes[0], *(instance.nodes[i] for i in seq_idx), instance.nodes[-1]]
    return SrpSolution(sequence=sequence, cost=float(total))


def solve_cutting_planes(instance: SrpInstance) -> SrpSolution:
    """Cutting-plane solve of the sequencing model.

    The open path is closed with a zero-cost arc from the end depot back
    to the start depot, reducing it to a tour. Each round solves the
    degree-constrained assignment model over the allowed arcs plus all
    accumulated subtour cuts, then separates connected components of the
    selected arcs; one spanning component means optimality.
    """
    n = len(instance.nodes)
    start, end = 0, n - 1
    # allowed arcs: the only arc into start is end->start (the free
    # closing arc) and the only arc out of end is end->start
    arcs: list[tuple[int, int]] = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if j == start and i != end:
                continue
            if i == end and j != start:
                continue
            arcs.append((i, j))
    arc_index = {a: idx for idx, a in enumerate(arcs)}
    cost = np.array(
        [0.0 if (i, j) == (end, start) else instance.costs[i, j] for i, j in arcs]
    )
    m = len(arcs)

    rows: list[np.ndarray] = []
    lb: list[float] = []
    ub: list[float] = []
    for node in range(n):  # degree-1 out and in at every node
        out_row = np.zeros(m)
        in_row = np.zeros(m)
        for (i, j), idx in arc_index.items():
            if i == node:
                out_row[idx] = 1.0
            if j == node:
                in_row[idx] = 1.0
        rows += [out_row, in_row]
        lb += [1.0, 1.0]
        ub += [1.0, 1.0]

    cuts: list[np.ndarray] = []
    cut_bounds: list[float] = []
    first_round = True
    while True:
        if first_round:
            # the cut-free degree model is a plain assignment problem
            first_round = False
            big = instance.costs.max() * n + 1.0
            square = np.full((n, n), big)
            for (i, j), idx in arc_index.items():
                square[i, j] = cost[idx]
            row_ind, col_ind = linear_sum_assignment(square)
            succ = {int(i): int(j) for i, j in zip(row_ind, col_ind)}
            components = _components(succ)
            if len(components) == 1:
                return _solution_from_succ(instance, succ)
            for comp in components:
                row = np.zeros(m)
                comp_set = set(comp)
                for (i, j), idx in arc_index.items():
                    if i in comp_set and j in comp_set:
                        row[idx] = 1.0
                cuts.append(row)
                cut_bounds.append(float(len(comp) - 1))
            continue
        a_rows = rows + cuts
        constraints = LinearConstraint(
            np.vstack(a_rows), np.array(lb + [-np.inf] * len(cuts)), np.array(ub + cut_bounds)
        )
        res = milp(
            c=cost,
            constraints=constraints,
            integrality=np.ones(m),
            bounds=Bounds(0, 1),
        )
        if res.status != 0:
            raise RuntimeError(f"assignment subproblem failed: {res.message}")
        chosen = [arcs[idx] for idx in range(m) if res.x[idx] > 0.5]
        succ = {i: j for i, j in chosen}
        components = _components(succ)
        if len(components) == 1:
            return _solution_from_succ(instance, succ)
        for comp in components:  # one subtour-elimination cut per component
            row = np.zeros(m)
            comp_set = set(comp)
            for (i, j), idx in arc_index.items():
                if i in comp_set and j in comp_set:
                    row[idx] = 1.0
            cuts.append(row)
            cut_bounds.append(float(len(comp) - 1))


def _solution_from_succ(instance: SrpInstance, succ: dict[int, int]) -> SrpSolution:
    start = 0
    sequence_idx = [start]
    node = succ[start]
    while node != start:
        sequence_idx.append(node)
        node = succ[node]
    sequence = [instance.nodes[i] for i in sequence_idx]
    total = _sequence_cost(instance, tuple(sequence_idx[1:-1]))
    return SrpSolution(sequence=sequence, cost=total)


def _components(succ: dict[int, int]) -> list[list[int]]:
    """Decompose a permutation's selected arcs into its cycles."""
    seen: set[int] = set()
    comps: list[list[int]] = []
    for node in sorted(succ):
        if node in seen:
            continue
        cycle = [node]
        seen.add(node)
        cur = succ[node]
        while cur != node:
            cycle.append(cur)
            seen.add(cur)
            cur = succ[cur]
        comps.append(cycle)
    return comps
