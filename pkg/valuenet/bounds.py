"""
valuenet/bounds.py
Interval bounds for every hidden neuron of a ReLUNet over a box of inputs.

For a neuron w.x + b on [l, u] the extremes are reached at the corner that
takes u_i where w_i >= 0 and l_i elsewhere (M+), and the mirrored corner (M-).
Post-activation bounds are [max(0, M-), max(0, M+)] and feed the next layer.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from env.errors import BoundsError
from valuenet.relu_net import ReLUNet


@dataclass(frozen=True)
class LayerBounds:
    input_lower: np.ndarray
    input_upper: np.ndarray
    # pre-activation extremes per hidden layer
    m_minus: List[np.ndarray]
    m_plus: List[np.ndarray]
    # post-activation bounds per hidden layer
    lower: List[np.ndarray]
    upper: List[np.ndarray]

    def dead(self, layer: int) -> np.ndarray:
        return self.m_plus[layer] <= 0

    def always_active(self, layer: int) -> np.ndarray:
        return self.m_minus[layer] >= 0


def _check_box(lower: np.ndarray, upper: np.ndarray) -> None:
    if lower.shape != upper.shape:
        raise BoundsError(f"box sides differ in shape: {lower.shape} vs {upper.shape}")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise BoundsError("input box must be finite")
    if np.any(lower > upper):
        raise BoundsError("input box has lower > upper")


def layer_bigM(w: np.ndarray, b: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized neuron_bigM over all rows of w."""
    pos = np.where(w >= 0, w, 0.0)
    neg = np.where(w < 0, w, 0.0)
    m_plus = pos @ upper + neg @ lower + b
    m_minus = pos @ lower + neg @ upper + b
    return m_plus, m_minus


def neuron_bigM(w, b: float, lower, upper) -> Tuple[float, float]:
    """(M+, M-) of w.x + b over the box [lower, upper]."""
    w = np.asarray(w, dtype=float).reshape(-1)
    lower = np.asarray(lower, dtype=float).reshape(-1)
    upper = np.asarray(upper, dtype=float).reshape(-1)
    _check_box(lower, upper)
    if w.shape != lower.shape:
        raise BoundsError(f"weight length {w.shape[0]} does not match box dimension {lower.shape[0]}")
    m_plus, m_minus = layer_bigM(w[np.newaxis, :], np.array([float(b)]), lower, upper)
    return float(m_plus[0]), float(m_minus[0])


def propagate_bounds(net: ReLUNet, lower, upper) -> LayerBounds:
    """Layer-by-layer interval bounds for a box given in raw (unscaled) state units."""
    lower = np.asarray(lower, dtype=float).reshape(-1)
    upper = np.asarray(upper, dtype=float).reshape(-1)
    _check_box(lower, upper)
    if lower.shape[0] != net.input_dim:
        raise BoundsError(f"box has dimension {lower.shape[0]}, network expects {net.input_dim}")

    m_minus, m_plus, post_lower, post_upper = [], [], [], []
    lo, hi = lower / net.scale, upper / net.scale
    for w, b in zip(net.weights, net.biases):
        mp, mm = layer_bigM(w, b, lo, hi)
        m_plus.append(mp)
        m_minus.append(mm)
        lo, hi = np.maximum(mm, 0.0), np.maximum(mp, 0.0)
        post_lower.append(lo)
        post_upper.append(hi)
    return LayerBounds(lower, upper, m_minus, m_plus, post_lower, post_upper)
