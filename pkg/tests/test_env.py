import numpy as np
import pytest
from numpy.testing import assert_array_equal

from bench.presets import load_named
from env.config_parser import parse_config
from env.distributions import Const, Normal, discretize, parse_distribution
from env.errors import ConfigError, ContractViolation
from env.network import Network
from env.simulator import (
    InventoryEnv,
    Realization,
    apply_proportional_fulfillment,
    episode_seeds,
    inventory_position,
    network_inventory,
    reset,
    sample_uncertainty,
    state_vector,
    step,
)
from tests.conftest import line_text, make_network, make_state


class TestParseConfig:
    def test_group_lead_times_one_per_link(self):
        config, _ = load_named("1s3r")
        assert [link.lead_time for link in config.links] == [1, 2, 3]

    def test_list_values_repeat_cyclically(self):
        config, _ = load_named("1s10r")
        assert [link.lead_time for link in config.links] == [1, 2, 3, 1, 2, 3, 1, 2, 3, 1]
        assert [n.holding_cost for n in config.nodes[1:5]] == [1, 2, 4, 8]

    def test_empty_document(self):
        with pytest.raises(ConfigError, match="no nodes declared"):
            parse_config("")

    def test_unknown_key_reports_line(self):
        text = line_text().replace("fixed_cost = 10", "fixed_cost = 10\ncolour = blue")
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert "colour" in str(info.value)
        assert info.value.line == text.splitlines().index("colour = blue") + 1

    def test_link_to_undeclared_node(self):
        text = line_text().replace("[link.S1.R1]", "[link.S1.R9]")
        with pytest.raises(ConfigError, match="undeclared node R9"):
            parse_config(text)

    def test_negative_cost_rejected(self):
        with pytest.raises(ConfigError, match="holding_cost"):
            parse_config(line_text(holding=-1))

    def test_missing_demand(self):
        text = line_text().replace("demand = normal(3,2)\n", "")
        with pytest.raises(ConfigError, match="demand"):
            parse_config(text)

    def test_backorder_and_gamma(self):
        config, _ = load_named("1sinf1r-backorder")
        retailer = config.node("R1")
        assert config.gamma == 0.99
        assert retailer.is_backorder
        assert retailer.backorder_cost == 7
        assert config.node("S1").infinite_supply

    def test_distributions(self):
        assert parse_distribution("normal(2,10)") == Normal(2, 10)
        assert parse_distribution("const(5)") == Const(5)
        with pytest.raises(ConfigError):
            parse_distribution("poisson(3)")
        with pytest.raises(ConfigError):
            parse_distribution("normal(2,-1)")


class TestDistributions:
    def test_clamp_and_round(self):
        assert discretize(-3.4) == 0
        assert discretize(8.6) == 9
        assert discretize(2.5) == 3
        assert_array_equal(discretize([0.49, 1.5, -0.2]), [0, 2, 0])

    def test_constant_production(self):
        network = Network(load_named("1s3r")[0])
        rng = np.random.default_rng(3)
        for _ in range(20):
            assert sample_uncertainty(network, rng).production[0] == 10

    def test_constant_has_no_inverse(self):
        with pytest.raises(ValueError):
            Const(3).ppf(0.5)


class TestReset:
    def test_uniform_initial_inventory(self, smoke):
        state = reset(smoke, seed=11)
        for pipe in state.pipelines:
            assert pipe.min() >= 0 and pipe.max() <= 4

    def test_degenerate_initial_inventory(self):
        network = make_network(init="uniform(0,0)")
        state = reset(network, seed=5)
        assert all(not pipe.any() for pipe in state.pipelines)

    def test_deterministic(self, smoke):
        a, b = reset(smoke, seed=7), reset(smoke, seed=7)
        for x, y in zip(a.pipelines, b.pipelines):
            assert_array_equal(x, y)

    def test_pipeline_lengths_follow_lead_times(self):
        network = Network(load_named("1s3r")[0])
        state = reset(network, seed=0)
        assert [len(p) for p in state.pipelines] == [1, 2, 3, 4]
        assert network.state_dim == 10


class TestProportionalFulfillment:
    def test_largest_remainder(self, two_retailers):
        state = make_state([4], [0, 0], [0, 0])
        assert_array_equal(apply_proportional_fulfillment(two_retailers, state, [5, 3]), [2, 2])

    @pytest.mark.parametrize("on_hand,requested,shipped", [
        (4, [3, 5], [2, 2]),   # equal remainders: smaller floor first
        (3, [2, 2], [2, 1]),   # equal floors too: lower link index
    ])
    def test_remainder_ties(self, two_retailers, on_hand, requested, shipped):
        state = make_state([on_hand], [0, 0], [0, 0])
        assert_array_equal(apply_proportional_fulfillment(two_retailers, state, requested), shipped)

    def test_no_scarcity(self, two_retailers):
        state = make_state([10], [0, 0], [0, 0])
        assert_array_equal(apply_proportional_fulfillment(two_retailers, state, [5, 3]), [5, 3])

    def test_nothing_on_hand(self, two_retailers):
        state = make_state([0], [0, 0], [0, 0])
        assert_array_equal(apply_proportional_fulfillment(two_retailers, state, [5, 3]), [0, 0])

    def test_total_never_exceeds_availability(self, two_retailers):
        rng = np.random.default_rng(0)
        for _ in range(50):
            on_hand = int(rng.integers(0, 12))
            requested = rng.integers(0, 6, size=2)
            shipped = apply_proportional_fulfillment(two_retailers, make_state([on_hand], [0, 0], [0, 0]), requested)
            assert shipped.sum() == min(on_hand, requested.sum())
            assert np.all(shipped <= requested)


class TestStep:
    def test_retailer_sale(self):
        network = make_network(capacity=50)
        state = make_state([0], [5, 0])
        real = Realization(np.array([0, 2]), np.array([0, 0]))
        next_state, breakdown = step(network, state, np.array([0]), real)
        assert breakdown.rs[1] == 100
        assert breakdown.hsc[1] == 3
        assert breakdown.per_node[1] == 97
        assert breakdown.total == 97
        assert_array_equal(next_state.pipelines[1], [3, 0])

    def test_zero_everything(self, zero_demand):
        state = make_state([0], [0, 0])
        real = Realization(np.array([0, 0]), np.array([0, 0]))
        next_state, breakdown = step(zero_demand, state, np.array([0]), real)
        assert breakdown.total == 0
        assert next_state.period == 1
        assert_array_equal(next_state.pipelines[1], [0, 0])

    def test_spillage(self):
        network = make_network(capacity=50)
        state = make_state([0], [60, 0])
        real = Realization(np.array([0, 0]), np.array([0, 0]))
        next_state, breakdown = step(network, state, np.array([0]), real)
        assert breakdown.hsc[1] == 50 * 1 + 10 * 10
        assert breakdown.spilled[1] == 10
        assert next_state.on_hand(1) == 50

    def test_order_enters_pipeline_and_costs(self, smoke):
        state = make_state([6], [1, 0])
        real = Realization(np.array([0, 0]), np.array([5, 0]))
        next_state, breakdown = step(smoke, state, np.array([4]), real)
        assert breakdown.tsc[1] == 10
        assert_array_equal(next_state.pipelines[1], [1, 4])
        assert next_state.on_hand(0) == 6 + 5 - 4

    def test_infeasible_action(self, smoke):
        state = make_state([1], [0, 0])
        real = Realization(np.array([0, 0]), np.array([0, 0]))
        with pytest.raises(ContractViolation):
            step(smoke, state, np.array([9]), real)

    def test_wrong_shape(self, smoke):
        with pytest.raises(ContractViolation):
            step(smoke, make_state([1], [0, 0]), np.array([0, 0]), Realization(np.zeros(2), np.zeros(2)))

    def test_backlog_accumulates_and_clears(self):
        network = Network(load_named("1sinf1r-backorder")[0])
        state = make_state([0], [3, 2, 10, 0, 0], backlog=[0, 1])

        state, first = step(network, state, np.array([6]), Realization(np.array([0, 8]), np.array([0, 0])))
        assert first.sales[1] == 5
        assert_array_equal(state.backlog, [0, 4])
        assert first.bpc[1] == 7 * 4
        assert first.hsc[1] == 0 and first.rs[1] == 0 and first.tsc[1] == 0
        assert first.total == -28
        assert_array_equal(state.pipelines[1], [0, 10, 0, 0, 6])
        assert inventory_position(network, state, "R1", 4) == 12

        state, second = step(network, state, np.array([0]), Realization(np.array([0, 4]), np.array([0, 0])))
        # backlog is served on top of this period's demand
        assert second.sales[1] == 8
        assert_array_equal(state.backlog, [0, 0])
        assert second.bpc[1] == 0
        assert second.hsc[1] == pytest.approx(0.8 * 2)
        assert second.total == pytest.approx(-1.6)
        assert_array_equal(state.pipelines[1], [2, 0, 0, 6, 0])

    def test_conservation(self, smoke):
        env = InventoryEnv(smoke, seed=4)
        state = env.reset()
        rng = np.random.default_rng(1)
        for _ in range(30):
            before = network_inventory(smoke, state)
            state, breakdown, real, _ = env.step(rng.integers(0, 11, size=1))
            after = network_inventory(smoke, state)
            assert after == before + real.production.sum() - breakdown.sales.sum() - breakdown.spilled.sum()


class TestInventoryPosition:
    @pytest.fixture
    def backorder(self):
        return Network(load_named("1sinf1r-backorder")[0])

    def test_direct_sum(self, backorder):
        state = make_state([0], [3, 2, 1, 0, 0])
        assert inventory_position(backorder, state, "R1", 2) == 6

    def test_backlog_netting(self, backorder):
        state = make_state([0], [3, 2, 1, 0, 0], backlog=[0, 4])
        assert inventory_position(backorder, state, "R1", 2) == 2

    def test_zero(self, backorder):
        assert inventory_position(backorder, make_state([0], [0] * 5), 1, 4) == 0

    def test_unknown_node(self, backorder):
        with pytest.raises(ContractViolation):
            inventory_position(backorder, make_state([0], [0] * 5), "R7", 1)

    def test_state_vector_includes_backlog(self, backorder):
        state = make_state([0], [3, 2, 1, 0, 0], backlog=[0, 4])
        assert_array_equal(state_vector(backorder, state), [3, 2, 1, 0, 0, 4])


class TestEnvironment:
    def test_paired_demand(self, smoke):
        a, b = InventoryEnv(smoke, seed=9), InventoryEnv(smoke, seed=9)
        a.reset(), b.reset()
        for t in range(20):
            _, _, real_a, _ = a.step(np.array([0]))
            _, _, real_b, _ = b.step(np.array([t % 3]))
            assert_array_equal(real_a.demand, real_b.demand)

    def test_step_before_reset(self, smoke):
        with pytest.raises(ContractViolation):
            InventoryEnv(smoke).step(np.array([0]))

    def test_rationing_flag(self, smoke):
        env = InventoryEnv(smoke, seed=2)
        env.reset()
        *_, rationed = env.step(np.array([10]))
        assert rationed

    def test_episode_seeds(self):
        seeds = episode_seeds(3, runs=2, episodes=4)
        assert len(seeds) == 2 and all(len(row) == 4 for row in seeds)
        assert seeds == episode_seeds(3, 2, 4)
        assert len({s for row in seeds for s in row}) == 8
