import itertools

import numpy as np
import pytest

from storepick.srp import (
    ORACLE_ENUM_MAX,
    SrpInstance,
    SrpSizeError,
    build_instance,
    instance_from_matrix,
    make_sequencer,
    solve_cutting_planes,
    solve_oracle,
)
from storepick.graph import distance_matrix


def random_instance(rng, n_picks, low=1, high=50, symmetric=False):
    n = n_picks + 2
    costs = rng.integers(low, high, size=(n, n)).astype(float)
    if symmetric:
        costs = (costs + costs.T) / 2.0
    np.fill_diagonal(costs, 0.0)
    return SrpInstance(nodes=tuple(range(10, 10 + n)), costs=costs)


def exhaustive_best_cost(instance):
    """Plain permutation scan, written independently of the solvers."""
    k = len(instance.nodes) - 2
    best = float("inf")
    for perm in itertools.permutations(range(1, k + 1)):
        idx = (0, *perm, k + 1)
        cost = sum(instance.costs[a, b] for a, b in zip(idx, idx[1:]))
        best = min(best, cost)
    return best


class TestInstanceConstruction:
    def test_requires_a_pick(self):
        with pytest.raises(ValueError):
            SrpInstance(nodes=(0, 1), costs=np.zeros((2, 2)))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            SrpInstance(nodes=(0, 1, 2), costs=np.zeros((2, 2)))

    def test_rejects_non_finite(self):
        costs = np.zeros((3, 3))
        costs[0, 1] = np.inf
        with pytest.raises(ValueError):
            SrpInstance(nodes=(0, 1, 2), costs=costs)

    def test_build_instance_deduplicates_picks(self, tiny_graph):
        prods = tiny_graph.product_nodes[:3]
        inst = build_instance(tiny_graph, [prods[1], prods[0], prods[1]])
        assert inst.picks == (prods[0], prods[1])
        assert inst.nodes[0] == tiny_graph.entrance
        assert inst.nodes[-1] == tiny_graph.prep_zone

    def test_build_instance_costs_are_path_costs(self, tiny_graph):
        from storepick.graph import shortest_path

        prods = tiny_graph.product_nodes[:3]
        inst = build_instance(tiny_graph, prods)
        for i, u in enumerate(inst.nodes):
            for j, v in enumerate(inst.nodes):
                if u != v:
                    cost, _ = shortest_path(tiny_graph, u, v)
                    assert inst.costs[i, j] == pytest.approx(cost)


class TestOracles:
    def test_single_pick_is_forced(self):
        costs = np.array([[0.0, 3.0, 9.0], [4.0, 0.0, 5.0], [9.0, 9.0, 0.0]])
        inst = SrpInstance(nodes=(100, 7, 200), costs=costs)
        for method in ("enumerate", "held_karp"):
            sol = solve_oracle(inst, method)
            assert sol.sequence == [100, 7, 200]
            assert sol.cost == pytest.approx(8.0)

    def test_two_picks_hand_computed(self):
        # start=0, picks=1,2, end=3; route 0-1-2-3 costs 1+1+1=3,
        # route 0-2-1-3 costs 10+1+10=21
        costs = np.array(
            [
                [0.0, 1.0, 10.0, 99.0],
                [99.0, 0.0, 1.0, 10.0],
                [99.0, 1.0, 0.0, 1.0],
                [99.0, 99.0, 99.0, 0.0],
            ]
        )
        inst = SrpInstance(nodes=(0, 1, 2, 3), costs=costs)
        sol = solve_oracle(inst)
        assert sol.sequence == [0, 1, 2, 3]
        assert sol.cost == pytest.approx(3.0)

    def test_enumeration_matches_exhaustive_scan(self):
        rng = np.random.default_rng(3)
        for k in range(1, 7):
            inst = random_instance(rng, k)
            sol = solve_oracle(inst, "enumerate")
            assert sol.cost == pytest.approx(exhaustive_best_cost(inst))

    def test_dp_matches_enumeration(self):
        rng = np.random.default_rng(5)
        for k in range(1, 9):
            for _ in range(5):
                inst = random_instance(rng, k)
                enum = solve_oracle(inst, "enumerate")
                dp = solve_oracle(inst, "held_karp")
                assert dp.cost == pytest.approx(enum.cost)
                # the dp sequence must realize its claimed cost
                idx = {node: i for i, node in enumerate(inst.nodes)}
                path = [idx[n] for n in dp.sequence]
                assert dp.cost == pytest.approx(
                    sum(inst.costs[a, b] for a, b in zip(path, path[1:]))
                )

    def test_tie_break_lexicographic(self):
        # all unit arcs: every permutation costs k+1, smallest ids first
        k = 4
        costs = np.ones((k + 2, k + 2))
        np.fill_diagonal(costs, 0.0)
        inst = SrpInstance(nodes=(0, 12, 15, 17, 30, 99), costs=costs)
        for method in ("enumerate", "held_karp"):
            sol = solve_oracle(inst, method)
            assert sol.sequence == [0, 12, 15, 17, 30, 99]

    def test_size_limits_enforced(self):
        rng = np.random.default_rng(0)
        inst = random_instance(rng, ORACLE_ENUM_MAX + 1)
        with pytest.raises(SrpSizeError):
            solve_oracle(inst, "enumerate")
        inst = random_instance(rng, 16)
        with pytest.raises(SrpSizeError):
            solve_oracle(inst, "held_karp")


class TestCuttingPlanes:
    def test_single_pick(self):
        costs = np.array([[0.0, 3.0, 9.0], [4.0, 0.0, 5.0], [9.0, 9.0, 0.0]])
        inst = SrpInstance(nodes=(100, 7, 200), costs=costs)
        sol = solve_cutting_planes(inst)
        assert sol.sequence == [100, 7, 200]
        assert sol.cost == pytest.approx(8.0)

    def test_instance_forcing_a_cut_round(self):
        # picks {1,2} and {3,4} pair off almost freely, so the relaxed
        # assignment splits into two cycles and a subtour cut is needed
        n = 6  # start, 4 picks, end
        costs = np.full((n, n), 50.0)
        np.fill_diagonal(costs, 0.0)
        costs[1, 2] = costs[2, 1] = 0.1
        costs[3, 4] = costs[4, 3] = 0.1
        costs[0, 1] = 5.0
        costs[2, 3] = 5.0
        costs[4, 5] = 5.0
        inst = SrpInstance(nodes=tuple(range(6)), costs=costs)
        sol = solve_cutting_planes(inst)
        oracle = solve_oracle(inst, "enumerate")
        assert sol.cost == pytest.approx(oracle.cost)
        assert sol.sequence[0] == 0 and sol.sequence[-1] == 5
        assert sorted(sol.sequence[1:-1]) == [1, 2, 3, 4]

    @pytest.mark.parametrize("n_picks", range(1, 9))
    def test_matches_enumeration_on_random_instances(self, n_picks):
        rng = np.random.default_rng(100 + n_picks)
        for _ in range(25):
            inst = random_instance(rng, n_picks)
            sol = solve_cutting_planes(inst)
            oracle = solve_oracle(inst, "enumerate")
            assert sol.cost == pytest.approx(oracle.cost)

    def test_matches_dp_on_larger_instances(self):
        rng = np.random.default_rng(42)
        for n_picks in (10, 12):
            inst = random_instance(rng, n_picks, symmetric=True)
            sol = solve_cutting_planes(inst)
            oracle = solve_oracle(inst, "held_karp")
            assert sol.cost == pytest.approx(oracle.cost)

    def test_sequence_is_valid_permutation(self):
        rng = np.random.default_rng(9)
        inst = random_instance(rng, 6)
        sol = solve_cutting_planes(inst)
        assert sol.sequence[0] == inst.nodes[0]
        assert sol.sequence[-1] == inst.nodes[-1]
        assert sorted(sol.sequence[1:-1]) == sorted(inst.picks)

    def test_cost_scaling_invariance(self):
        rng = np.random.default_rng(17)
        inst = random_instance(rng, 5)
        scaled = SrpInstance(nodes=inst.nodes, costs=inst.costs * 3.5)
        base = solve_cutting_planes(inst)
        sol = solve_cutting_planes(scaled)
        assert sol.cost == pytest.approx(base.cost * 3.5)


class TestBases:
    def test_crowdedness_changes_the_route(self):
        # two picks, symmetric in distance, but traffic penalizes one order
        from storepick.graph import NodeKind, StoreGraph, StoreNode

        # path graph 0-1-2-3-4-5; picks at 2 and 4, start 0, end 5
        nodes = [StoreNode(0, NodeKind.ENTRANCE)]
        nodes += [StoreNode(i, NodeKind.INTERSECTION) for i in (1, 3)]
        nodes += [StoreNode(i, NodeKind.PRODUCT) for i in (2, 4)]
        nodes.append(StoreNode(5, NodeKind.PREP_ZONE))
        g = StoreGraph(nodes, [(i, i + 1, 1.0) for i in range(5)])
        dist_sol = solve_cutting_planes(build_instance(g, [2, 4], "arc_distance"))
        assert dist_sol.sequence == [0, 2, 4, 5]  # no backtracking
        # distance order is forced on a path, so crowdedness agrees here,
        # but its costs count traffic instead of meters
        traffic = {1: 2.0, 3: 1.0}
        crowd = build_instance(g, [2, 4], "arc_crowdedness", traffic)
        i02 = crowd.nodes.index(0), crowd.nodes.index(2)
        assert crowd.costs[i02] == pytest.approx(2.0)  # via node 1 (+2) and node 2 (+0)

    def test_unknown_basis_rejected(self, tiny_graph):
        with pytest.raises(ValueError):
            build_instance(tiny_graph, tiny_graph.product_nodes[:2], "arc_length")


class TestSequencer:
    def test_matches_direct_solve(self, tiny_graph):
        seq = make_sequencer(tiny_graph)
        rng = np.random.default_rng(8)
        prods = tiny_graph.product_nodes
        for _ in range(10):
            picks = sorted(rng.choice(prods, size=5, replace=False).tolist())
            got = seq(picks, tiny_graph.entrance, tiny_graph.prep_zone)
            inst = build_instance(tiny_graph, picks)
            want = solve_cutting_planes(inst)
            assert [tiny_graph.entrance, *got, tiny_graph.prep_zone] == want.sequence

    def test_memoization_returns_copies(self, tiny_graph):
        seq = make_sequencer(tiny_graph)
        picks = tiny_graph.product_nodes[:3]
        a = seq(picks, tiny_graph.entrance, tiny_graph.prep_zone)
        b = seq(picks, tiny_graph.entrance, tiny_graph.prep_zone)
        assert a == b and a is not b
        a.append(-1)
        assert seq(picks, tiny_graph.entrance, tiny_graph.prep_zone) == b

    def test_instance_from_matrix_matches_build_instance(self, tiny_graph):
        relevant = sorted({*tiny_graph.product_nodes, tiny_graph.entrance, tiny_graph.prep_zone})
        matrix = distance_matrix(tiny_graph, relevant)
        picks = tiny_graph.product_nodes[2:6]
        a = instance_from_matrix(matrix, picks, tiny_graph.entrance, tiny_graph.prep_zone)
        b = build_instance(tiny_graph, picks)
        assert a.nodes == b.nodes
        np.testing.assert_allclose(a.costs, b.costs)
