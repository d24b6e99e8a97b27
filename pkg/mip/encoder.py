"""
mip/encoder.py
Big-M encoding of a ReLUNet inside a MilpModel.

For every hidden neuron with pre-activation a = w.z + b and bounds M- < 0 < M+:

    z >= a,   z >= 0,   z <= a - M-(1 - y),   z <= M+ y,   y binary

Neurons with M+ <= 0 become z = 0 and neurons with M- >= 0 become z = a;
neither needs a binary.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from env.errors import ModelError
from mip.model import LinExpr, MilpModel
from valuenet.bounds import LayerBounds
from valuenet.relu_net import ReLUNet

logger = logging.getLogger(__name__)

_BOX_TOL = 1e-9


@dataclass
class EncodedNetwork:
    # z variable indices per hidden layer
    layers: List[List[int]] = field(default_factory=list)
    # binary indices per hidden layer, None where the neuron is bound-forced
    binaries: List[List[int]] = field(default_factory=list)
    value: LinExpr = field(default_factory=LinExpr)
    n_dead: int = 0
    n_active: int = 0

    @property
    def n_binaries(self) -> int:
        return sum(1 for layer in self.binaries for y in layer if y is not None)


def encode_network(model: MilpModel, net: ReLUNet, bounds: LayerBounds, input_vars: Sequence[int],
                   prefix: str = "nn") -> EncodedNetwork:
    """Add the encoding of net over input_vars; returns handles and the value expression c.z_K."""
    if len(input_vars) != net.input_dim:
        raise ModelError(f"{len(input_vars)} input variables for a network of input dimension {net.input_dim}")
    for k, var in enumerate(input_vars):
        v = model.variables[var]
        if math.isinf(v.lower) or math.isinf(v.upper):
            raise ModelError(f"input variable {v.name} is unbounded")
        if v.lower < bounds.input_lower[k] - _BOX_TOL or v.upper > bounds.input_upper[k] + _BOX_TOL:
            raise ModelError(
                f"input variable {v.name} box [{v.lower}, {v.upper}] exceeds the propagated box "
                f"[{bounds.input_lower[k]}, {bounds.input_upper[k]}]"
            )

    encoded = EncodedNetwork()
    prev = list(input_vars)
    # previous-layer neurons known to be zero drop out of the next layer's rows
    prev_dead = np.zeros(len(prev), dtype=bool)

    for k, (w, b) in enumerate(net.effective_layers()):
        m_plus, m_minus = bounds.m_plus[k], bounds.m_minus[k]
        zs, ys = [], []
        dead_now = np.zeros(w.shape[0], dtype=bool)
        for q in range(w.shape[0]):
            pre = LinExpr(constant=float(b[q]))
            for j, var in enumerate(prev):
                if not prev_dead[j] and w[q, j] != 0.0:
                    pre.add(var, float(w[q, j]))
            tag = f"{prefix}_l{k + 1}_n{q}"

            if m_plus[q] <= 0:
                z = model.add_var(f"z_{tag}", "continuous", 0.0, 0.0)
                model.add_constraint(LinExpr({z: 1.0}), "=", 0.0, name=f"dead_{tag}")
                dead_now[q] = True
                encoded.n_dead += 1
                ys.append(None)
            elif m_minus[q] >= 0:
                z = model.add_var(f"z_{tag}", "continuous", float(m_minus[q]), float(m_plus[q]))
                model.add_constraint(LinExpr({z: 1.0}).add_expr(pre, -1.0), "=", 0.0, name=f"act_{tag}")
                encoded.n_active += 1
                ys.append(None)
            else:
                z = model.add_var(f"z_{tag}", "continuous", 0.0, float(m_plus[q]))
                y = model.add_var(f"y_{tag}", "binary", 0.0, 1.0)
                # z >= a
                model.add_constraint(LinExpr({z: 1.0}).add_expr(pre, -1.0), ">=", 0.0, name=f"lo_{tag}")
                # z >= 0
                model.add_constraint(LinExpr({z: 1.0}), ">=", 0.0, name=f"pos_{tag}")
                # z <= a - M-(1 - y)
                row = LinExpr({z: 1.0}).add_expr(pre, -1.0)
                row.add(y, -float(m_minus[q]))
                row.constant += float(m_minus[q])
                model.add_constraint(row, "<=", 0.0, name=f"hi_{tag}")
                # z <= M+ y
                model.add_constraint(LinExpr({z: 1.0, y: -float(m_plus[q])}), "<=", 0.0, name=f"on_{tag}")
                ys.append(y)
            zs.append(z)
        encoded.layers.append(zs)
        encoded.binaries.append(ys)
        prev, prev_dead = zs, dead_now

    value = LinExpr()
    for q, var in enumerate(prev):
        if not prev_dead[q]:
            value.add(var, float(net.c[q]))
    encoded.value = value
    logger.debug(f"Encoded {prefix}: {encoded.n_binaries} binaries, {encoded.n_dead} dead, "
                 f"{encoded.n_active} always-active neurons")
    return encoded
