import itertools

import numpy as np
import pytest
import torch
from numpy.testing import assert_allclose, assert_array_equal

from env.errors import BoundsError, FitError, NetworkShapeError
from valuenet.bounds import neuron_bigM, propagate_bounds
from valuenet.relu_net import (
    FitDataset,
    FitHyper,
    ReLUNet,
    activations,
    fit,
    forward,
    forward_batch,
    from_module,
    init_net,
    loss_and_gradients,
    to_module,
)
from valuenet.serialization import dumps, load_net, loads, save_net


def single_neuron():
    return ReLUNet([np.array([[1.0]])], [np.array([0.0])], np.array([1.0]))


class TestForward:
    def test_relu_kills_negative(self):
        assert forward(single_neuron(), [-2.0]) == 0.0

    def test_identity_on_positive(self):
        assert forward(single_neuron(), [3.0]) == 3.0

    def test_matches_hand_computation(self):
        net = init_net(3, (4, 2), seed=5, scale=np.array([1.0, 2.0, 4.0]))
        inputs = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [5.0, -1.0, 8.0]])
        for s in inputs:
            h1 = np.maximum(net.weights[0] @ (s / net.scale) + net.biases[0], 0)
            h2 = np.maximum(net.weights[1] @ h1 + net.biases[1], 0)
            assert abs(forward(net, s) - float(net.c @ h2)) < 1e-12
        assert_allclose(forward_batch(net, inputs), [forward(net, s) for s in inputs], atol=1e-12)

    def test_activations_last_layer_feeds_output(self):
        net = init_net(2, (3, 3), seed=1)
        _, post = activations(net, [0.4, 0.7])
        assert abs(float(net.c @ post[-1]) - forward(net, [0.4, 0.7])) < 1e-12

    def test_wrong_input_dimension(self):
        with pytest.raises(NetworkShapeError):
            forward(single_neuron(), [1.0, 2.0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(NetworkShapeError):
            ReLUNet([np.ones((2, 3))], [np.zeros(3)], np.ones(2))


def mse(net, states, targets):
    return float(np.mean((forward_batch(net, states) - targets) ** 2))


def random_point(rng, hidden=(5, 4)):
    """Random parameters and data with every pre-activation away from the ReLU kink."""
    while True:
        net = init_net(3, hidden, seed=int(rng.integers(1 << 30)), scale=rng.uniform(0.5, 2.0, size=3))
        states = rng.uniform(0, 1, size=(8, 3))
        if all(np.min(np.abs(pre)) > 1e-3 for s in states for pre in activations(net, s)[0]):
            return net, states, rng.normal(size=8)


class TestGradients:
    def test_autograd_against_finite_differences(self):
        rng = np.random.default_rng(0)
        eps = 1e-6
        for _ in range(100):
            net, states, targets = random_point(rng)
            _, grads = loss_and_gradients(net, states, targets)
            params = net.parameters()
            for k, p in enumerate(params):
                numeric = np.zeros_like(p)
                for idx in np.ndindex(p.shape):
                    shifted = [q.copy() for q in params]
                    shifted[k][idx] += eps
                    up = mse(net.with_parameters(shifted), states, targets)
                    shifted[k][idx] -= 2 * eps
                    down = mse(net.with_parameters(shifted), states, targets)
                    numeric[idx] = (up - down) / (2 * eps)
                scale = max(np.linalg.norm(grads[k]) + np.linalg.norm(numeric), 1e-12)
                assert np.linalg.norm(grads[k] - numeric) / scale <= 1e-4

    def test_loss_matches_numpy_forward(self):
        rng = np.random.default_rng(3)
        net, states, targets = random_point(rng)
        loss, grads = loss_and_gradients(net, states, targets)
        assert loss == pytest.approx(mse(net, states, targets), rel=1e-12)
        assert [g.shape for g in grads] == [p.shape for p in net.parameters()]


class TestTorchModule:
    def test_round_trip_is_exact(self):
        net = init_net(3, (4, 2), seed=6, scale=np.array([1.0, 2.0, 4.0]))
        back = from_module(to_module(net), net.scale)
        for a, b in zip(net.parameters(), back.parameters()):
            assert_array_equal(a, b)
        assert_array_equal(back.scale, net.scale)

    def test_module_agrees_with_forward(self):
        net = init_net(3, (4, 2), seed=6, scale=np.array([1.0, 2.0, 4.0]))
        states = np.random.default_rng(8).uniform(0, 5, size=(10, 3))
        with torch.no_grad():
            out = to_module(net)(torch.as_tensor(states / net.scale)).squeeze(-1).numpy()
        assert_allclose(out, forward_batch(net, states), atol=1e-12)

    def test_no_hidden_layers(self):
        net = init_net(2, (), seed=0)
        assert from_module(to_module(net), net.scale).hidden_dims == ()


class TestScaleCovariance:
    def test_doubling_c_doubles_output(self):
        rng = np.random.default_rng(12)
        net = init_net(3, (6, 5), seed=4)
        doubled = net.with_parameters(net.parameters()[:-1] + [2.0 * net.c])
        for s in rng.uniform(-1, 2, size=(50, 3)):
            assert forward(doubled, s) == 2.0 * forward(net, s)

    def test_forward_is_deterministic(self):
        net = init_net(3, (6, 5), seed=4)
        assert forward(net, [0.3, 0.1, 0.9]) == forward(net, [0.3, 0.1, 0.9])


class TestFit:
    def test_constant_targets(self):
        rng = np.random.default_rng(1)
        states = rng.uniform(0, 1, size=(64, 2))
        net, trace = fit(init_net(2, seed=3), FitDataset(states, np.full(64, 5.0)),
                         FitHyper(step_size=0.01, batch_size=32, epochs=500))
        assert trace[-1] < 1e-2
        assert_allclose(forward_batch(net, states), 5.0, atol=0.3)

    def test_linear_targets(self):
        rng = np.random.default_rng(2)
        states = rng.uniform(0, 1, size=(128, 2))
        targets = 1.0 + 2.0 * states[:, 0] + 3.0 * states[:, 1]
        _, trace = fit(init_net(2, seed=4), FitDataset(states, targets),
                       FitHyper(step_size=0.01, batch_size=32, epochs=1500))
        assert trace[-1] < 1e-2

    def test_does_not_modify_input_net(self):
        net = init_net(2, seed=0)
        before = [p.copy() for p in net.parameters()]
        fit(net, FitDataset(np.ones((4, 2)), np.ones(4)), FitHyper(epochs=3))
        for a, b in zip(before, net.parameters()):
            assert_array_equal(a, b)

    def test_zero_step_size_keeps_parameters(self):
        net = init_net(2, (4, 3), seed=7)
        data = FitDataset(np.random.default_rng(5).uniform(size=(16, 2)), np.arange(16.0))
        fitted, trace = fit(net, data, FitHyper(step_size=0.0, batch_size=4, epochs=5))
        for a, b in zip(net.parameters(), fitted.parameters()):
            assert_array_equal(a, b)
        assert len(set(trace)) == 1

    def test_full_batch_loss_is_nonincreasing(self):
        rng = np.random.default_rng(2)
        states = rng.uniform(0, 1, size=(64, 2))
        targets = 1.0 + 2.0 * states[:, 0] + 3.0 * states[:, 1]
        _, trace = fit(init_net(2, seed=4), FitDataset(states, targets),
                       FitHyper(step_size=0.001, batch_size=64, epochs=200))
        assert np.all(np.diff(trace) <= 1e-6 * trace[0])
        assert trace[-1] < trace[0]

    def test_deterministic(self):
        data = FitDataset(np.random.default_rng(0).uniform(size=(32, 2)), np.arange(32.0))
        _, a = fit(init_net(2, seed=0), data, FitHyper(epochs=5))
        _, b = fit(init_net(2, seed=0), data, FitHyper(epochs=5))
        assert a == b

    def test_empty_dataset(self):
        with pytest.raises(FitError):
            fit(init_net(2), FitDataset(np.zeros((0, 2)), np.zeros(0)))

    def test_non_finite_targets(self):
        with pytest.raises(FitError):
            FitDataset(np.zeros((2, 2)), [1.0, np.nan])

    def test_diverging_fit_aborts(self):
        states = np.full((8, 2), 1e200)
        with pytest.raises(FitError):
            fit(init_net(2, seed=0), FitDataset(states, np.full(8, 1e200)), FitHyper(epochs=2))


class TestBigM:
    def test_sign_based_extremes(self):
        assert neuron_bigM([1.0, -2.0], 0.5, [0, 0], [1, 1]) == (1.5, -1.5)

    def test_constant_neuron(self):
        assert neuron_bigM([0.0, 0.0], 3.0, [0, 0], [1, 1]) == (3.0, 3.0)

    def test_corner_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            w, b = rng.normal(size=3), float(rng.normal())
            lower = rng.uniform(-2, 0, size=3)
            upper = lower + rng.uniform(0, 3, size=3)
            corners = [w @ np.array(c) + b for c in itertools.product(*zip(lower, upper))]
            m_plus, m_minus = neuron_bigM(w, b, lower, upper)
            assert abs(m_plus - max(corners)) < 1e-12
            assert abs(m_minus - min(corners)) < 1e-12

    def test_infinite_box(self):
        with pytest.raises(BoundsError):
            neuron_bigM([1.0], 0.0, [0.0], [np.inf])


class TestPropagateBounds:
    def test_single_neuron(self):
        bounds = propagate_bounds(single_neuron(), [-1.0], [2.0])
        assert bounds.lower[0][0] == 0.0 and bounds.upper[0][0] == 2.0

    def test_dead_layer(self):
        net = ReLUNet([np.ones((3, 2))], [np.full(3, -10.0)], np.ones(3))
        bounds = propagate_bounds(net, [0, 0], [1, 1])
        assert_array_equal(bounds.upper[0], 0.0)
        assert bounds.dead(0).all()
        assert forward(net, [1.0, 1.0]) == 0.0

    def test_containment(self):
        rng = np.random.default_rng(11)
        for seed in range(5):
            net = init_net(3, (6, 5), seed=seed, scale=np.array([2.0, 1.0, 5.0]))
            lower, upper = np.zeros(3), np.array([4.0, 3.0, 10.0])
            bounds = propagate_bounds(net, lower, upper)
            for s in rng.uniform(lower, upper, size=(1000, 3)):
                pre, post = activations(net, s)
                for k in range(2):
                    assert np.all(pre[k] <= bounds.m_plus[k] + 1e-9)
                    assert np.all(pre[k] >= bounds.m_minus[k] - 1e-9)
                    assert np.all(post[k] <= bounds.upper[k] + 1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(BoundsError):
            propagate_bounds(single_neuron(), [0, 0], [1, 1])


class TestSerialization:
    def test_bit_exact(self, tmp_path):
        net = init_net(4, (3, 2), seed=9, scale=np.array([1.0, 3.0, 7.0, 0.1]))
        loaded = load_net(save_net(net, tmp_path / "critic.txt"))
        for a, b in zip(net.parameters(), loaded.parameters()):
            assert_array_equal(a, b)
        assert_array_equal(net.scale, loaded.scale)
        assert dumps(loaded) == dumps(net)

    def test_bad_header(self):
        with pytest.raises(NetworkShapeError):
            loads("not a network\n")

    def test_truncated(self):
        text = dumps(init_net(2, (2,), seed=0))
        with pytest.raises(NetworkShapeError):
            loads("\n".join(text.splitlines()[:-1]))
