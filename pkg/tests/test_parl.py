import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from env.distributions import discretize
from env.errors import ContractViolation, SamplingError
from env.simulator import InventoryEnv, reset
from mip.step_problem import saa_objective
from parl.policy import GreedyPolicy, greedy_action, greedy_decision
from parl.rollout import compute_returns, rollout
from parl.sampling import SamplingSpec, quantile_levels, quantile_samples, random_samples, top_k_products
from parl.train import CURVE_COLUMNS, ParlHyper, parl_train
from solver.enumeration import solve_enumeration
from valuenet.relu_net import FitHyper, init_net
from tests.conftest import make_network


def zero_policy(state):
    return np.zeros(1, dtype=np.int64)


def small_hyper(**overrides):
    params = dict(iterations=2, paths=2, steps=8, hidden=(4,), fit=FitHyper(epochs=5, batch_size=8),
                  sampling=SamplingSpec(eta=2), parallelism=2, seed=0)
    params.update(overrides)
    return ParlHyper(**params)


class TestReturns:
    def test_discounted_sum(self):
        assert_allclose(compute_returns([1.0, 1.0, 1.0], 0.5), [1.75, 1.5, 1.0])

    def test_zero_discount_gives_rewards(self):
        assert_allclose(compute_returns([3.0, -2.0, 5.0], 0.0), [3.0, -2.0, 5.0])

    @pytest.mark.parametrize("gamma", [0.75, 0.99])
    def test_rollout_returns_match_double_sum(self, smoke, gamma):
        traj = rollout(InventoryEnv(smoke, seed=9), zero_policy, 50, 0.5, np.random.default_rng(4))
        rewards = traj.rewards()
        expected = [sum(gamma ** (k - t) * rewards[k] for k in range(t, 50)) for t in range(50)]
        assert_allclose(compute_returns(traj, gamma), expected, rtol=1e-12, atol=1e-9)

    def test_empty(self):
        with pytest.raises(ContractViolation):
            compute_returns([], 0.9)


class TestQuantileSamples:
    def test_levels(self):
        assert_allclose(quantile_levels(4), [0.125, 0.375, 0.625, 0.875])
        with pytest.raises(SamplingError):
            quantile_levels(0)

    def test_points_and_weights_follow_inverse_cdf(self):
        network = make_network(demand="normal(2,10)")
        samples = quantile_samples(network, 3)
        levels = quantile_levels(3)
        points = discretize(stats.norm.ppf(levels, loc=2, scale=10))
        density = stats.norm.pdf(levels, loc=2, scale=10)
        expected = dict(zip(points.tolist(), density / density.sum()))
        got = {int(r.demand[1]): float(w) for r, w in zip(samples.realizations, samples.weights)}
        assert set(got) == set(expected)
        for point, weight in got.items():
            assert weight == pytest.approx(expected[point])
        assert samples.weights.sum() == pytest.approx(1.0)
        assert all(r.production[0] == 5 for r in samples.realizations)

    def test_single_level_is_the_median(self):
        samples = quantile_samples(make_network(demand="normal(2,10)"), 1)
        assert len(samples) == 1
        assert samples.realizations[0].demand[1] == 2
        assert samples.weights[0] == 1.0

    def test_uniform_weights(self):
        samples = quantile_samples(make_network(demand="normal(2,10)"), 3, weights="uniform")
        assert_allclose(samples.weights, 1 / 3)

    def test_quantile_set_is_deterministic(self, smoke):
        a, b = quantile_samples(smoke, 3), quantile_samples(smoke, 3)
        assert_array_equal(a.demand_matrix(), b.demand_matrix())
        assert_array_equal(a.weights, b.weights)

    def test_top_k_against_exhaustive_product(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            weights = [rng.uniform(0.1, 1.0, size=4) for _ in range(3)]
            exhaustive = sorted(
                ((float(np.prod([weights[j][q] for j, q in enumerate(index)])), index)
                 for index in itertools.product(range(4), repeat=3)),
                key=lambda pair: (-pair[0], pair[1]),
            )
            picked = top_k_products(weights, 5)
            assert [index for index, _ in picked] == [index for _, index in exhaustive[:5]]
            assert_allclose([w for _, w in picked], [w for w, _ in exhaustive[:5]])

    def test_two_dimensions_keep_eta_combinations(self, two_retailers):
        samples = quantile_samples(two_retailers, 2)
        assert len(samples) == 2
        assert samples.weights.sum() == pytest.approx(1.0)


class TestRandomSamples:
    def test_deterministic_for_seed(self, smoke):
        a = random_samples(smoke, 4, np.random.default_rng(3))
        b = random_samples(smoke, 4, np.random.default_rng(3))
        assert_array_equal(a.demand_matrix(), b.demand_matrix())
        assert_allclose(a.weights, 0.25)

    def test_single_draw(self, smoke):
        samples = random_samples(smoke, 1, np.random.default_rng(0))
        assert len(samples) == 1 and samples.weights[0] == 1.0

    @pytest.mark.parametrize("seed", [0, 1])
    def test_large_sample_mean_matches_integrated_mean(self, seed):
        network = make_network(demand="normal(2,10)")
        samples = random_samples(network, 10_000, np.random.default_rng(seed))
        units = np.arange(0, 200)
        mass = stats.norm.cdf(units + 0.5, 2, 10) - stats.norm.cdf(units - 0.5, 2, 10)
        mass[0] = stats.norm.cdf(0.5, 2, 10)
        mean = float(units @ mass)
        sd = float(np.sqrt((units ** 2) @ mass - mean ** 2))
        empirical = samples.demand_matrix()[:, 1].mean()
        assert abs(empirical - mean) <= 3 * sd / np.sqrt(10_000)

    def test_bad_eta(self, smoke):
        with pytest.raises(SamplingError):
            random_samples(smoke, 0, np.random.default_rng(0))


class TestRollout:
    def test_full_exploration(self, smoke):
        traj = rollout(InventoryEnv(smoke, seed=1), zero_policy, 32, 1.0, np.random.default_rng(0))
        assert len(traj) == 32
        assert traj.explored().all()

    def test_greedy_rollout_is_deterministic(self, smoke):
        a = rollout(InventoryEnv(smoke, seed=5), zero_policy, 16, 0.0, np.random.default_rng(1))
        b = rollout(InventoryEnv(smoke, seed=5), zero_policy, 16, 0.0, np.random.default_rng(2))
        assert_array_equal(a.rewards(), b.rewards())
        assert not a.explored().any()

    def test_exploration_rate(self, smoke):
        traj = rollout(InventoryEnv(smoke, seed=2), zero_policy, 256, 0.1, np.random.default_rng(3))
        # binomial(256, 0.1): mean 25.6, sd 4.8
        assert abs(int(traj.explored().sum()) - 25.6) <= 3 * 4.8

    def test_contract(self, smoke):
        env = InventoryEnv(smoke, seed=0)
        with pytest.raises(ContractViolation):
            rollout(env, zero_policy, 0, 0.1, np.random.default_rng(0))
        with pytest.raises(ContractViolation):
            rollout(env, zero_policy, 4, 1.5, np.random.default_rng(0))


class TestGreedy:
    @pytest.mark.parametrize("seed", [0, 1])
    def test_branch_and_bound_agrees_with_enumeration(self, smoke, seed):
        net = init_net(smoke.state_dim, (4, 3), seed=seed, scale=smoke.state_scale())
        state = reset(smoke, seed=seed)
        samples = quantile_samples(smoke, 3)
        action = greedy_action(state, net, samples, smoke, 0.9, solver="bnb", time_limit=60)
        best = solve_enumeration(state, samples, net, smoke, 0.9)
        assert saa_objective(state, action, samples, net, smoke, 0.9) == pytest.approx(best.objective, abs=1e-6)

    def test_flat_critic_orders_nothing(self, zero_demand):
        net = init_net(zero_demand.state_dim, (3,), seed=0)
        net.c = np.zeros_like(net.c)
        action = greedy_action(reset(zero_demand, seed=0), net, quantile_samples(zero_demand, 2), zero_demand, 0.9)
        assert_array_equal(action, [0])

    def test_weight_rescaling_does_not_change_action(self, smoke):
        net = init_net(smoke.state_dim, (4,), seed=3, scale=smoke.state_scale())
        state = reset(smoke, seed=3)
        samples = quantile_samples(smoke, 3)
        scaled = samples.with_weights(samples.weights * 7.0)
        a = greedy_decision(state, net, samples, smoke, 0.9, solver="enumeration")
        b = greedy_decision(state, net, scaled, smoke, 0.9, solver="enumeration")
        assert_array_equal(a.action, b.action)
        assert a.objective == pytest.approx(b.objective)


class TestGreedyPolicy:
    def test_spawn_keeps_critic_and_resets_timings(self, smoke):
        net = init_net(smoke.state_dim, (4,), seed=1, scale=smoke.state_scale())
        policy = GreedyPolicy(smoke, net, 0.9, SamplingSpec(eta=2))
        policy(reset(smoke, seed=0))
        child = policy.spawn(11)
        assert child.net is net
        assert child.solve_times == [] and len(policy.solve_times) == 1
        assert child.seed == 11

    def test_quantile_set_built_once(self, smoke):
        policy = GreedyPolicy(smoke, init_net(smoke.state_dim, (2,)), 0.9, SamplingSpec(eta=3))
        assert policy.samples() is policy.samples()

    def test_random_sets_follow_seed(self, smoke):
        spec = SamplingSpec(scheme="random", eta=3)
        net = init_net(smoke.state_dim, (2,))
        a, b = GreedyPolicy(smoke, net, 0.9, spec, seed=4), GreedyPolicy(smoke, net, 0.9, spec, seed=4)
        assert_array_equal(a.samples().demand_matrix(), b.samples().demand_matrix())


class TestTraining:
    def test_curve_shape_and_checkpoints(self, smoke):
        seen = []
        result = parl_train(smoke, small_hyper(), checkpoint=lambda it, net: seen.append(it))
        assert list(result.curve.columns) == CURVE_COLUMNS
        assert len(result.curve) == 2
        assert seen == [1, 2]
        assert result.curve["env_steps"].tolist() == [16, 32]
        assert result.curve.loc[0, "explored_fraction"] == 1.0

    def test_deterministic(self, smoke):
        stable = [c for c in CURVE_COLUMNS if c not in ("elapsed", "solve_time_per_step")]
        a = parl_train(smoke, small_hyper())
        b = parl_train(smoke, small_hyper())
        assert a.curve[stable].equals(b.curve[stable])
        for p, q in zip(a.net.parameters(), b.net.parameters()):
            assert_array_equal(p, q)

    def test_single_iteration(self, smoke):
        result = parl_train(smoke, small_hyper(iterations=1))
        assert len(result.curve) == 1
        assert result.net.input_dim == smoke.state_dim
        assert isinstance(result.policy, GreedyPolicy)

    def test_warm_start_and_trajectory_logs(self, smoke):
        result = parl_train(smoke, small_hyper(warm_start=True, log_trajectories=True))
        assert len(result.trajectories) == 4
        frame = result.trajectories[0]
        assert {"iteration", "path", "period", "node", "reward"} <= set(frame.columns)

    @pytest.mark.slow
    def test_greedy_iterations_beat_random_start(self, smoke):
        hyper = dict(iterations=4, paths=4, steps=32, hidden=(8,), fit=FitHyper(epochs=50, batch_size=16),
                     sampling=SamplingSpec(eta=3))
        wins = 0
        for seed in range(5):
            curve = parl_train(smoke, small_hyper(seed=seed, **hyper)).curve
            rewards = curve.set_index("iteration")["mean_reward"]
            wins += all(rewards[j] >= rewards[1] for j in (3, 4))
        # one-sided sign test over five seeds
        assert stats.binomtest(wins, 5, alternative="greater").pvalue <= 0.2

    def test_explicit_gamma_wins(self, smoke):
        assert small_hyper(gamma=0.5).discount(smoke) == 0.5
        assert small_hyper().discount(smoke) == 0.75
