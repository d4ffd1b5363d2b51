import numpy as np
import pytest

from storepick.graph import NodeKind, validate
from storepick.instances import (
    CONCENTRATIONS,
    MAX_LIST_LENGTH,
    SIZES,
    ConcentrationProfile,
    LayoutSpec,
    build_benchmark,
    generate_layout,
    sample_shopping_list,
    table_defaults,
)


class TestLayouts:
    @pytest.mark.parametrize("size", SIZES)
    def test_layouts_validate_clean(self, size):
        graph = generate_layout(LayoutSpec.for_size(size))
        assert validate(graph) == []

    def test_unknown_size_rejected(self):
        with pytest.raises(ValueError):
            LayoutSpec.for_size("gigantic")

    def test_sizes_strictly_grow(self):
        counts = [
            len(generate_layout(LayoutSpec.for_size(s)).product_nodes) for s in SIZES
        ]
        assert counts == sorted(counts)
        assert len(set(counts)) == len(counts)

    def test_entrance_is_node_zero_prep_is_highest(self):
        g = generate_layout(LayoutSpec.for_size("small"))
        assert g.entrance == 0
        assert g.prep_zone == max(g.node_ids)
        assert g.nodes[g.prep_zone].kind == NodeKind.PREP_ZONE

    def test_expected_node_census(self):
        # tiny: 3 aisles x 2 blocks -> 3*3 intersections, 3*2*2 products,
        # 2 exits, entrance, prep zone
        g = generate_layout(LayoutSpec.for_size("tiny"))
        kinds = [node.kind for node in g.nodes.values()]
        assert kinds.count(NodeKind.INTERSECTION) == 9
        assert kinds.count(NodeKind.PRODUCT) == 12
        assert kinds.count(NodeKind.EXIT) == 2
        assert kinds.count(NodeKind.ENTRANCE) == 1
        assert kinds.count(NodeKind.PREP_ZONE) == 1
        assert len(g.products) == 12

    def test_generation_is_deterministic(self):
        a = generate_layout(LayoutSpec.for_size("medium"), seed=1)
        b = generate_layout(LayoutSpec.for_size("medium"), seed=2)
        assert a.edges() == b.edges()
        assert a.products == b.products


class TestProfiles:
    def test_weights_are_a_distribution(self, tiny_graph):
        for mode in CONCENTRATIONS:
            profile = ConcentrationProfile.build(tiny_graph, mode)
            assert profile.weights.sum() == pytest.approx(1.0)
            assert (profile.weights > 0).all()
            assert len(profile.weights) == len(tiny_graph.product_nodes)

    def test_unknown_mode_rejected(self, tiny_graph):
        with pytest.raises(ValueError):
            ConcentrationProfile.build(tiny_graph, "everywhere")

    def test_entrance_and_back_pull_opposite_ways(self):
        from storepick.graph import shortest_path

        g = generate_layout(LayoutSpec.for_size("medium"))
        dist = {
            n: shortest_path(g, g.entrance, n)[0] for n in g.product_nodes
        }

        def mean_distance(profile):
            return sum(dist[n] * w for n, w in zip(profile.product_nodes, profile.weights))

        front = mean_distance(ConcentrationProfile.build(g, "entrance"))
        middle = mean_distance(ConcentrationProfile.build(g, "middle"))
        back = mean_distance(ConcentrationProfile.build(g, "back"))
        assert front < middle < back

    def test_uniform_flattens_weights(self, tiny_profile):
        flat = tiny_profile.uniform()
        assert np.ptp(flat.weights) == 0.0
        assert flat.weights.sum() == pytest.approx(1.0)


class TestShoppingLists:
    def test_lengths_in_one_to_ten(self, tiny_profile):
        rng = np.random.default_rng(0)
        lengths = [len(sample_shopping_list(tiny_profile, rng)) for _ in range(10_000)]
        assert min(lengths) == 1
        assert max(lengths) == MAX_LIST_LENGTH == 10

    def test_items_are_distinct_products(self, tiny_graph, tiny_profile):
        rng = np.random.default_rng(1)
        prods = set(tiny_graph.product_nodes)
        for _ in range(200):
            lst = sample_shopping_list(tiny_profile, rng)
            assert len(lst) == len(set(lst))
            assert set(lst) <= prods

    def test_every_length_occurs(self, tiny_profile):
        rng = np.random.default_rng(2)
        lengths = {len(sample_shopping_list(tiny_profile, rng)) for _ in range(5000)}
        assert lengths == set(range(1, 11))

    def test_sampling_follows_the_weights(self, tiny_graph):
        # entrance-heavy profile should over-sample near products relative
        # to the uniform profile, in singleton draws
        profile = ConcentrationProfile.build(tiny_graph, "entrance")
        rng = np.random.default_rng(3)
        counts = dict.fromkeys(profile.product_nodes, 0)
        draws = 20_000
        for _ in range(draws):
            keys = rng.exponential(size=len(profile.product_nodes)) / profile.weights
            counts[profile.product_nodes[int(np.argmin(keys))]] += 1
        freq = np.array([counts[n] / draws for n in profile.product_nodes])
        np.testing.assert_allclose(freq, profile.weights, atol=0.01)


class TestBenchmark:
    def test_twelve_instances(self):
        configs = build_benchmark()
        assert len(configs) == 12
        assert {(c.size, c.concentration) for c in configs} == {
            (s, m) for s in SIZES for m in CONCENTRATIONS
        }
        assert len({c.name for c in configs}) == 12

    def test_shared_constants(self):
        cfg = table_defaults()
        assert cfg.customer_arrival_rate == 2.0
        assert cfg.order_arrival_rate == 0.2
        assert cfg.open_time == 8 * 3600.0
        assert cfg.store_capacity == 50
        assert cfg.node_capacity == 5
        assert cfg.customer_speed == cfg.picker_speed == 1.0
        assert cfg.customer_service_time == cfg.picker_service_time == 30.0
        w = cfg.reward_weights
        assert (w.step, w.same_node, w.visible, w.pick) == (1.0, 3.0, 1.0, 100.0)

    def test_instance_graphs_validate(self):
        for config in build_benchmark():
            assert validate(config.make_graph()) == []
