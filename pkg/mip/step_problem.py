"""
mip/step_problem.py
Per-decision MILP: choose shipments x that maximise

    -sum(K g + C x) + sum_i w_i [ sum_l (p sa - h I'0 - delta B - b backlog') + gamma c.z_K ]

with one copy of the transition and of the critic encoding per demand sample.

dynamics="exact" makes sales and spillage follow the simulator exactly
(sales = min(owed, on hand), spillage = overflow above capacity) using
indicator binaries only where the sample's interval box leaves the outcome
open. dynamics="relaxed" keeps sales and spillage as free decisions bounded
by those quantities.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from env.errors import ModelError
from env.network import Network, NetworkConfig
from env.simulator import PipelineState, as_network, shipping_capacity, state_vector, step
from mip.encoder import EncodedNetwork, encode_network
from mip.model import LinExpr, MilpModel
from valuenet.bounds import propagate_bounds
from valuenet.relu_net import ReLUNet, activations, forward, forward_batch

if TYPE_CHECKING:
    from parl.sampling import SampleSet

logger = logging.getLogger(__name__)


class StepOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    dynamics: Literal["exact", "relaxed"] = "exact"
    salvage_all_slots: bool = False
    relax_integrality: bool = False


@dataclass
class StepProblem:
    model: MilpModel
    network: Network
    x_vars: List[int]
    g_vars: List[int]
    # per sample, in state-vector order
    next_state_vars: List[List[int]] = field(default_factory=list)
    sales_vars: List[Dict[int, int]] = field(default_factory=list)
    encodings: List[EncodedNetwork] = field(default_factory=list)
    boxes: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    # variables per sample outside the critic encoding
    aux_counts: List[int] = field(default_factory=list)

    def action(self, solution) -> np.ndarray:
        solution = np.asarray(solution, dtype=float)
        return np.rint(solution[self.x_vars]).astype(np.int64)


def _check_samples(network: Network, samples: "SampleSet") -> None:
    if len(samples) == 0:
        raise ModelError("sample set is empty")
    if abs(float(np.sum(samples.weights)) - 1.0) > 1e-9:
        raise ModelError(f"sample weights sum to {float(np.sum(samples.weights))}, expected 1")
    for real in samples.realizations:
        if real.demand.shape != (network.n_nodes,) or real.production.shape != (network.n_nodes,):
            raise ModelError(
                f"sample has shape {real.demand.shape}/{real.production.shape}, network has {network.n_nodes} nodes"
            )


def _order_upper(network: Network, avail: np.ndarray) -> np.ndarray:
    """Largest feasible quantity per link given the source's shipping capacity."""
    return np.minimum(network.max_order.astype(float), avail[network.src])


def build_step_problem(state: PipelineState, samples: "SampleSet", net: ReLUNet,
                       config: Union[Network, NetworkConfig], gamma: float,
                       options: Optional[StepOptions] = None) -> StepProblem:
    options = options or StepOptions()
    network = as_network(config)
    _check_samples(network, samples)
    if net.input_dim != network.state_dim:
        raise ModelError(f"critic takes {net.input_dim} inputs, state vector has {network.state_dim}")
    if options.salvage_all_slots and options.dynamics == "exact":
        raise ModelError("salvage_all_slots needs dynamics='relaxed'")
    exact = options.dynamics == "exact"

    avail = shipping_capacity(network, state)
    x_hi = _order_upper(network, avail)
    x_lo = network.min_order.astype(float)
    x_kind = "continuous" if options.relax_integrality else "integer"
    g_kind = "continuous" if options.relax_integrality else "binary"

    model = MilpModel(name=f"step_{network.config.name}_t{state.period}")
    x_vars, g_vars = [], []
    for e, link in enumerate(network.link_names):
        tag = link.replace(">", "_")
        x = model.add_var(f"x_{tag}", x_kind, float(network.min_order[e]), float(network.max_order[e]))
        g = model.add_var(f"g_{tag}", g_kind, 0.0, 1.0)
        x_vars.append(x)
        g_vars.append(g)
        # g <= x and x <= U^H g
        model.add_constraint(LinExpr({g: 1.0, x: -1.0}), "<=", 0.0, name=f"ind1_{tag}")
        model.add_constraint(LinExpr({x: 1.0, g: -float(network.max_order[e])}), "<=", 0.0, name=f"ind2_{tag}")
        model.add_objective({g: -float(network.fixed_cost[e]), x: -float(network.variable_cost[e])})

    for i in range(network.n_nodes):
        out = network.out_links[i]
        if out and not network.infinite[i]:
            model.add_constraint({x_vars[e]: 1.0 for e in out}, "<=", float(avail[i]),
                                 name=f"supply_{network.node_ids[i]}")

    def inflow(i: int, lead: int) -> Tuple[LinExpr, float, float]:
        expr, lo, hi = LinExpr(), 0.0, 0.0
        for e in network.in_links[i]:
            if network.lead[e] == lead:
                expr.add(x_vars[e], 1.0)
                lo += x_lo[e]
                hi += x_hi[e]
        return expr, lo, hi

    problem = StepProblem(model, network, x_vars, g_vars)
    demand_nodes = set(network.demand_nodes)

    for s, (real, weight) in enumerate(zip(samples.realizations, samples.weights)):
        weight = float(weight)
        first_var = model.n_vars
        inputs: List[int] = []
        sales: Dict[int, int] = {}
        owed_by_node: Dict[int, float] = {}

        for i in network.tracked_nodes:
            node = network.node_ids[i]
            tag = f"s{s}_{node}"
            pipe = state.pipelines[i]
            length = len(pipe)

            # intermediate on-hand after arrivals, production and departures
            base = float(pipe[0]) + (float(pipe[1]) if length > 1 else 0.0) + float(real.production[i])
            t_expr, in_lo, in_hi = inflow(i, 0)
            t_expr.constant = base
            out_lo = sum(x_lo[e] for e in network.out_links[i])
            out_hi = min(sum(x_hi[e] for e in network.out_links[i]), avail[i])
            for e in network.out_links[i]:
                t_expr.add(x_vars[e], -1.0)
            t_lo = max(0.0, base + in_lo - out_hi)
            t_hi = base + in_hi - out_lo
            t = model.add_var(f"t_{tag}", "continuous", t_lo, t_hi)
            model.add_constraint(LinExpr({t: 1.0}).add_expr(t_expr, -1.0), "=", 0.0, name=f"onhand_{tag}")

            leftover = LinExpr({t: 1.0})
            if i in demand_nodes:
                owed = float(real.demand[i])
                if network.is_backorder[i]:
                    owed += float(state.backlog[i])
                owed_by_node[i] = owed
                sa = _add_sales(model, tag, t, t_lo, t_hi, owed, exact)
                sales[i] = sa
                leftover.add(sa, -1.0)
                model.add_objective({sa: weight * float(network.price[i])})
                l_lo = max(0.0, t_lo - owed)
                l_hi = max(0.0, t_hi - owed) if exact else t_hi
            else:
                l_lo, l_hi = t_lo, t_hi

            kept, spill = _add_overflow(model, tag, leftover, l_lo, l_hi, float(network.capacity[i]), exact)
            model.add_objective({kept: -weight * float(network.holding[i]),
                                 spill: -weight * float(network.spillage[i])})
            inputs.append(kept)

            for j in range(1, length):
                expr, lo, hi = inflow(i, j)
                expr.constant = float(pipe[j + 1]) if j + 1 < length else 0.0
                lo += expr.constant
                hi += expr.constant
                slot = model.add_var(f"p{j}_{tag}", "continuous", 0.0 if options.salvage_all_slots else lo, hi)
                row = LinExpr({slot: 1.0}).add_expr(expr, -1.0)
                if options.salvage_all_slots:
                    salvage = model.add_var(f"b{j}_{tag}", "continuous", 0.0, hi)
                    row.add(salvage, 1.0)
                    model.add_objective({salvage: -weight * float(network.spillage[i])})
                model.add_constraint(row, "=", 0.0, name=f"rot{j}_{tag}")
                inputs.append(slot)

        for i in network.backorder_nodes:
            tag = f"s{s}_{network.node_ids[i]}"
            sa_var = model.variables[sales[i]]
            owed = owed_by_node[i]
            backlog = model.add_var(f"bl_{tag}", "continuous", owed - sa_var.upper, owed - sa_var.lower)
            model.add_constraint(LinExpr({backlog: 1.0, sales[i]: 1.0}), "=", owed, name=f"backlog_{tag}")
            model.add_objective({backlog: -weight * float(network.backorder_cost[i])})
            inputs.append(backlog)

        lower = np.array([model.variables[v].lower for v in inputs])
        upper = np.array([model.variables[v].upper for v in inputs])
        aux = model.n_vars - first_var
        bounds = propagate_bounds(net, lower, upper)
        encoded = encode_network(model, net, bounds, inputs, prefix=f"s{s}")
        model.add_objective(encoded.value, weight * gamma)

        problem.next_state_vars.append(inputs)
        problem.sales_vars.append(sales)
        problem.encodings.append(encoded)
        problem.boxes.append((lower, upper))
        problem.aux_counts.append(aux)

    logger.debug(f"Built {model.name}: {model.stats()}")
    return problem


def _add_sales(model: MilpModel, tag: str, t: int, t_lo: float, t_hi: float, owed: float, exact: bool) -> int:
    if not exact:
        sa = model.add_var(f"sa_{tag}", "continuous", 0.0, min(owed, t_hi))
        model.add_constraint(LinExpr({sa: 1.0, t: -1.0}), "<=", 0.0, name=f"salesinv_{tag}")
        return sa
    if t_hi <= owed:
        sa = model.add_var(f"sa_{tag}", "continuous", t_lo, t_hi)
        model.add_constraint(LinExpr({sa: 1.0, t: -1.0}), "=", 0.0, name=f"salesinv_{tag}")
        return sa
    if t_lo >= owed:
        return model.add_var(f"sa_{tag}", "continuous", owed, owed)
    sa = model.add_var(f"sa_{tag}", "continuous", t_lo, owed)
    u = model.add_var(f"u_{tag}", "binary")
    model.add_constraint(LinExpr({sa: 1.0, t: -1.0}), "<=", 0.0, name=f"salesinv_{tag}")
    # u = 1 when demand is the binding side
    model.add_constraint(LinExpr({sa: 1.0, t: -1.0, u: t_hi - owed}), ">=", 0.0, name=f"salesmin1_{tag}")
    model.add_constraint(LinExpr({sa: 1.0, u: -(owed - t_lo)}), ">=", t_lo, name=f"salesmin2_{tag}")
    return sa


def _add_overflow(model: MilpModel, tag: str, leftover: LinExpr, l_lo: float, l_hi: float, cap: float,
                  exact: bool) -> Tuple[int, int]:
    """Split leftover into kept (<= cap) and spilled units; returns (kept, spill)."""
    if not exact:
        kept = model.add_var(f"i0_{tag}", "continuous", 0.0, min(cap, l_hi))
        spill = model.add_var(f"sp_{tag}", "continuous", 0.0, max(0.0, l_hi))
    elif l_hi <= cap:
        kept = model.add_var(f"i0_{tag}", "continuous", l_lo, l_hi)
        spill = model.add_var(f"sp_{tag}", "continuous", 0.0, 0.0)
    elif l_lo >= cap:
        kept = model.add_var(f"i0_{tag}", "continuous", cap, cap)
        spill = model.add_var(f"sp_{tag}", "continuous", l_lo - cap, l_hi - cap)
    else:
        kept = model.add_var(f"i0_{tag}", "continuous", l_lo, cap)
        spill = model.add_var(f"sp_{tag}", "continuous", 0.0, l_hi - cap)
        v = model.add_var(f"v_{tag}", "binary")
        # v = 1 when capacity binds
        model.add_constraint(LinExpr({spill: 1.0, v: -(l_hi - cap)}), "<=", 0.0, name=f"spill_{tag}")
        model.add_constraint(LinExpr({kept: 1.0, v: -(cap - l_lo)}), ">=", l_lo, name=f"full_{tag}")
    # kept + spill = leftover
    model.add_constraint(LinExpr({kept: 1.0, spill: 1.0}).add_expr(leftover, -1.0), "=", 0.0, name=f"balance_{tag}")
    return kept, spill


def saa_objective(state: PipelineState, action, samples: "SampleSet", net: ReLUNet,
                  config: Union[Network, NetworkConfig], gamma: float) -> float:
    """The step objective evaluated through the simulator instead of the solver."""
    network = as_network(config)
    action = np.asarray(action, dtype=np.int64)
    total = 0.0
    for real, weight in zip(samples.realizations, samples.weights):
        next_state, breakdown = step(network, state, action, real)
        total += float(weight) * (breakdown.total + gamma * forward(net, state_vector(network, next_state)))
    return total


def saa_objective_batch(state: PipelineState, actions: np.ndarray, samples: "SampleSet", net: ReLUNet,
                        config: Union[Network, NetworkConfig], gamma: float) -> np.ndarray:
    """saa_objective for many actions at once; one critic batch per sample."""
    network = as_network(config)
    actions = np.asarray(actions, dtype=np.int64)
    values = np.zeros(actions.shape[0])
    for real, weight in zip(samples.realizations, samples.weights):
        rewards = np.empty(actions.shape[0])
        states = np.empty((actions.shape[0], network.state_dim))
        for k, action in enumerate(actions):
            next_state, breakdown = step(network, state, action, real)
            rewards[k] = breakdown.total
            states[k] = state_vector(network, next_state)
        values += float(weight) * (rewards + gamma * forward_batch(net, states))
    return values


def solution_from_action(problem: StepProblem, state: PipelineState, action, samples: "SampleSet",
                         net: ReLUNet) -> np.ndarray:
    """
    Complete MILP point for a fixed action, read off the simulator and the critic.

    Used to seed branch-and-bound with an incumbent (the zero action, say).
    """
    network, model = problem.network, problem.model
    action = np.asarray(action, dtype=np.int64)
    x = np.zeros(model.n_vars)
    x[problem.x_vars] = action
    x[problem.g_vars] = (action > 0).astype(float)

    def put(name: str, value: float) -> None:
        var = model.find(name)
        if var is not None:
            x[var] = value

    for s, real in enumerate(samples.realizations):
        next_state, breakdown = step(network, state, action, real)
        for i in network.tracked_nodes:
            tag = f"s{s}_{network.node_ids[i]}"
            pipe = state.pipelines[i]
            arriving = int(pipe[1]) if len(pipe) > 1 else 0
            zero_in = sum(int(action[e]) for e in network.in_links[i] if network.lead[e] == 0)
            out = sum(int(action[e]) for e in network.out_links[i])
            on_hand = int(pipe[0]) + arriving + int(real.production[i]) + zero_in - out
            put(f"t_{tag}", on_hand)
            sold = int(breakdown.sales[i])
            put(f"sa_{tag}", sold)
            owed = int(real.demand[i]) + (int(state.backlog[i]) if network.is_backorder[i] else 0)
            put(f"u_{tag}", 1.0 if on_hand >= owed else 0.0)
            put(f"i0_{tag}", next_state.pipelines[i][0])
            put(f"sp_{tag}", breakdown.spilled[i])
            put(f"v_{tag}", 1.0 if on_hand - sold >= network.capacity[i] else 0.0)
            for j in range(1, len(pipe)):
                put(f"p{j}_{tag}", next_state.pipelines[i][j])
            if network.is_backorder[i]:
                put(f"bl_{tag}", next_state.backlog[i])

        pre, post = activations(net, state_vector(network, next_state))
        encoded = problem.encodings[s]
        for k, (zs, ys) in enumerate(zip(encoded.layers, encoded.binaries)):
            for q, (z, y) in enumerate(zip(zs, ys)):
                x[z] = post[k][q]
                if y is not None:
                    x[y] = 1.0 if pre[k][q] > 0 else 0.0
    return x
