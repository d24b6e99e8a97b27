"""
valuenet/relu_net.py
Feed-forward ReLU value network: numpy evaluation, torch MSE gradients and Adam fitting.

V(s) = c . z_K,  z_k = max(0, W_{k-1} z_{k-1} + b_{k-1}),  z_1 = s / scale.
There is no output bias; the input scale is fixed per network and folded
into the first layer when the network is encoded as a MILP.
"""
import copy
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field
from torch import nn, optim

from env.errors import FitError, NetworkShapeError

logger = logging.getLogger(__name__)


@dataclass
class ReLUNet:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    c: np.ndarray
    scale: np.ndarray = field(default=None)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float).reshape(-1) for b in self.biases]
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.scale is None:
            self.scale = np.ones(self.weights[0].shape[1] if self.weights else self.c.shape[0])
        self.scale = np.asarray(self.scale, dtype=float).reshape(-1)
        self.validate()

    def validate(self) -> None:
        if len(self.weights) != len(self.biases):
            raise NetworkShapeError(f"{len(self.weights)} weight matrices but {len(self.biases)} bias vectors")
        width = self.scale.shape[0]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or w.shape[1] != width:
                raise NetworkShapeError(f"layer {k + 1}: weight shape {w.shape} does not take {width} inputs")
            if b.shape[0] != w.shape[0]:
                raise NetworkShapeError(f"layer {k + 1}: bias length {b.shape[0]} != {w.shape[0]} neurons")
            width = w.shape[0]
        if self.c.shape[0] != width:
            raise NetworkShapeError(f"output weights have length {self.c.shape[0]}, last layer has {width}")
        if np.any(self.scale <= 0):
            raise NetworkShapeError("input scale must be positive")
        for p in self.parameters():
            if not np.all(np.isfinite(p)):
                raise NetworkShapeError("network parameters must be finite")

    @property
    def input_dim(self) -> int:
        return int(self.scale.shape[0])

    @property
    def hidden_dims(self) -> Tuple[int, ...]:
        return tuple(int(w.shape[0]) for w in self.weights)

    def parameters(self) -> List[np.ndarray]:
        """Flat list W_1, b_1, ..., W_K, b_K, c."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        params.append(self.c)
        return params

    def with_parameters(self, params: Sequence[np.ndarray]) -> "ReLUNet":
        n = len(self.weights)
        if len(params) != 2 * n + 1:
            raise NetworkShapeError(f"expected {2 * n + 1} parameter arrays, got {len(params)}")
        return ReLUNet(
            weights=[np.array(params[2 * k]) for k in range(n)],
            biases=[np.array(params[2 * k + 1]) for k in range(n)],
            c=np.array(params[-1]),
            scale=self.scale.copy(),
        )

    def copy(self) -> "ReLUNet":
        return copy.deepcopy(self)

    def effective_layers(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Layers acting on the raw state: the input scale divided into W_1."""
        layers = [(w, b) for w, b in zip(self.weights, self.biases)]
        if layers:
            layers[0] = (layers[0][0] / self.scale[np.newaxis, :], layers[0][1])
        return layers


class FitHyper(BaseModel):
    step_size: float = Field(0.001, ge=0)
    batch_size: int = Field(64, ge=1)
    epochs: int = Field(200, ge=0)
    seed: int = 0


@dataclass
class FitDataset:
    states: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if self.targets.size == 0:
            self.states = self.states.reshape(0, self.states.shape[-1] if self.states.size else 0)
        if self.states.shape[0] != self.targets.shape[0]:
            raise FitError(f"{self.states.shape[0]} states but {self.targets.shape[0]} targets")
        if not np.all(np.isfinite(self.targets)):
            raise FitError("targets must be finite")

    def __len__(self) -> int:
        return int(self.targets.shape[0])


def init_net(input_dim: int, hidden: Sequence[int] = (16, 16), seed: int = 0,
             scale: Optional[np.ndarray] = None) -> ReLUNet:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    fan_in = input_dim
    for width in hidden:
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(width, fan_in)))
        biases.append(rng.uniform(-limit, limit, size=width))
        fan_in = width
    limit = 1.0 / np.sqrt(fan_in)
    c = rng.uniform(-limit, limit, size=fan_in)
    return ReLUNet(weights, biases, c, scale if scale is not None else np.ones(input_dim))


def _check_input(net: ReLUNet, states: np.ndarray) -> None:
    if states.shape[-1] != net.input_dim:
        raise NetworkShapeError(f"state has dimension {states.shape[-1]}, network expects {net.input_dim}")


def activations(net: ReLUNet, s) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Pre- and post-activation vectors of every hidden layer for one state."""
    x = np.asarray(s, dtype=float).reshape(-1)
    _check_input(net, x)
    z = x / net.scale
    pre, post = [], []
    for w, b in zip(net.weights, net.biases):
        zhat = w @ z + b
        z = np.maximum(zhat, 0.0)
        pre.append(zhat)
        post.append(z)
    return pre, post


def forward(net: ReLUNet, s) -> float:
    x = np.asarray(s, dtype=float).reshape(-1)
    _check_input(net, x)
    z = x / net.scale
    for w, b in zip(net.weights, net.biases):
        z = np.maximum(w @ z + b, 0.0)
    return float(net.c @ z)


def forward_batch(net: ReLUNet, states) -> np.ndarray:
    x = np.atleast_2d(np.asarray(states, dtype=float))
    _check_input(net, x)
    z = x / net.scale[np.newaxis, :]
    for w, b in zip(net.weights, net.biases):
        z = np.maximum(z @ w.T + b, 0.0)
    return z @ net.c


def to_module(net: ReLUNet) -> nn.Sequential:
    """Float64 torch copy of net: Linear/ReLU blocks and a bias-free Linear holding c."""
    layers: List[nn.Module] = []
    width = net.input_dim
    with torch.no_grad():
        for w, b in zip(net.weights, net.biases):
            linear = nn.Linear(w.shape[1], w.shape[0]).double()
            linear.weight.copy_(torch.as_tensor(np.ascontiguousarray(w)))
            linear.bias.copy_(torch.as_tensor(np.ascontiguousarray(b)))
            layers.extend([linear, nn.ReLU()])
            width = w.shape[0]
        head = nn.Linear(width, 1, bias=False).double()
        head.weight.copy_(torch.as_tensor(net.c).reshape(1, -1))
        layers.append(head)
    return nn.Sequential(*layers)


def from_module(module: nn.Sequential, scale: np.ndarray) -> ReLUNet:
    linears = [m for m in module if isinstance(m, nn.Linear)]
    hidden, head = linears[:-1], linears[-1]
    return ReLUNet(
        weights=[layer.weight.detach().numpy().copy() for layer in hidden],
        biases=[layer.bias.detach().numpy().copy() for layer in hidden],
        c=head.weight.detach().numpy().reshape(-1).copy(),
        scale=np.array(scale, dtype=float),
    )


def _scaled_inputs(net: ReLUNet, states: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.ascontiguousarray(states / net.scale[np.newaxis, :]))


def loss_and_gradients(net: ReLUNet, states: np.ndarray, targets: np.ndarray) -> Tuple[float, List[np.ndarray]]:
    """Mean squared error and its autograd gradient, ordered like net.parameters()."""
    x = np.atleast_2d(np.asarray(states, dtype=float))
    _check_input(net, x)
    module = to_module(net)
    y = torch.as_tensor(np.asarray(targets, dtype=float).reshape(-1))
    loss = nn.functional.mse_loss(module(_scaled_inputs(net, x)).squeeze(-1), y)
    loss.backward()
    grads = [p.grad.detach().numpy().copy() for p in module.parameters()]
    grads[-1] = grads[-1].reshape(-1)
    return float(loss.item()), grads


def fit(net: ReLUNet, data: FitDataset, hyper: Optional[FitHyper] = None) -> Tuple[ReLUNet, List[float]]:
    """
    Minimise the mean squared error of net on data with mini-batch Adam.

    Works on a torch copy; the loss trace holds the full-dataset MSE after every epoch.
    """
    hyper = hyper or FitHyper()
    if len(data) == 0:
        raise FitError("cannot fit on an empty dataset")
    _check_input(net, data.states)

    generator = torch.Generator().manual_seed(hyper.seed)
    module = to_module(net)
    optimizer = optim.Adam(module.parameters(), lr=hyper.step_size)
    loss_fn = nn.MSELoss()
    x = _scaled_inputs(net, data.states)
    y = torch.as_tensor(data.targets)
    n = len(data)
    trace: List[float] = []

    for epoch in range(hyper.epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(module(x[idx]).squeeze(-1), y[idx])
            if not torch.isfinite(loss):
                raise FitError(f"loss became {loss.item()} at epoch {epoch}, batch starting {start}")
            loss.backward()
            optimizer.step()
        with torch.no_grad():
            epoch_loss = float(loss_fn(module(x).squeeze(-1), y).item())
        if not np.isfinite(epoch_loss):
            raise FitError(f"loss became {epoch_loss} after epoch {epoch}")
        trace.append(epoch_loss)

    if trace:
        logger.debug(f"Critic fit: {n} samples, {hyper.epochs} epochs, MSE {trace[0]:.4g} -> {trace[-1]:.4g}")
    return from_module(module, net.scale), trace
