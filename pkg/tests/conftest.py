import numpy as np
import pytest

from storepick.graph import NodeKind, StoreGraph, StoreNode
from storepick.instances import ConcentrationProfile, LayoutSpec, generate_layout

ACCEPTANCE_RESULTS: list[str] = []


def record_criterion(number: int, description: str, ok: bool, detail: str = "") -> None:
    verdict = "PASS" if ok else "FAIL"
    line = f"{verdict} criterion {number}: {description}"
    if detail:
        line += f" [{detail}]"
    ACCEPTANCE_RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(ACCEPTANCE_RESULTS)):
            terminalreporter.write_line(line)


def all_pairs_fixpoint(graph: StoreGraph):
    """Iterate edge relaxations to a fixpoint; independent all-pairs oracle."""
    ids = graph.node_ids
    idx = {n: i for i, n in enumerate(ids)}
    n = len(ids)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v, length in graph.edges():
        dist[idx[u], idx[v]] = min(dist[idx[u], idx[v]], length)
        dist[idx[v], idx[u]] = min(dist[idx[v], idx[u]], length)
    changed = True
    while changed:
        changed = False
        for u, v, length in graph.edges():
            for a, b in ((idx[u], idx[v]), (idx[v], idx[u])):
                relaxed = dist[:, a] + length
                better = relaxed < dist[:, b]
                if better.any():
                    dist[better, b] = relaxed[better]
                    changed = True
    return ids, dist


def make_random_connected_graph(n: int, rng: np.random.Generator, extra_edges: int = 10) -> StoreGraph:
    """Random connected graph: a random spanning tree plus extra chords."""
    nodes = [StoreNode(id=0, kind=NodeKind.ENTRANCE)]
    nodes += [StoreNode(id=i, kind=NodeKind.INTERSECTION) for i in range(1, n - 1)]
    nodes.append(StoreNode(id=n - 1, kind=NodeKind.PREP_ZONE))
    edges = set()
    order = list(rng.permutation(n))
    for i in range(1, n):
        u = order[i]
        v = order[int(rng.integers(i))]
        edges.add((min(u, v), max(u, v)))
    for _ in range(extra_edges):
        u, v = rng.integers(n), rng.integers(n)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    lengths = {e: float(rng.integers(1, 20)) for e in edges}
    return StoreGraph(nodes, [(u, v, lengths[(u, v)]) for u, v in sorted(edges)])


@pytest.fixture(scope="session")
def tiny_graph():
    return generate_layout(LayoutSpec.for_size("tiny"))


@pytest.fixture(scope="session")
def tiny_profile(tiny_graph):
    return ConcentrationProfile.build(tiny_graph, "entrance")
