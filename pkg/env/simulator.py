"""
env/simulator.py
Discrete-time multi-echelon inventory simulator.

One period, in order: trans-shipment cost, intermediate on-hand, sales,
holding and spillage, backlog update, pipeline rotation.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from env.errors import ContractViolation
from env.network import Network, NetworkConfig

logger = logging.getLogger(__name__)

# integer units shipped per link, in link declaration order
Action = np.ndarray


@dataclass(frozen=True)
class PipelineState:
    pipelines: Tuple[np.ndarray, ...]
    backlog: np.ndarray
    period: int = 0

    def on_hand(self, node: int) -> int:
        return int(self.pipelines[node][0])

    def copy_with(self, pipelines, backlog, period) -> "PipelineState":
        return PipelineState(tuple(pipelines), backlog, period)


@dataclass(frozen=True)
class Realization:
    demand: np.ndarray
    production: np.ndarray


@dataclass(frozen=True)
class RewardBreakdown:
    rs: np.ndarray
    tsc: np.ndarray
    hsc: np.ndarray
    bpc: np.ndarray
    sales: np.ndarray
    spilled: np.ndarray

    @property
    def per_node(self) -> np.ndarray:
        return self.rs - self.tsc - self.hsc - self.bpc

    @property
    def total(self) -> float:
        return float(np.sum(self.per_node))


def as_network(net: Union[Network, NetworkConfig]) -> Network:
    return net if isinstance(net, Network) else Network(net)


def reset(config: Union[Network, NetworkConfig], seed: Optional[int] = None,
          rng: Optional[np.random.Generator] = None) -> PipelineState:
    """Draw every pipeline slot i.i.d. from its initial inventory distribution."""
    network = as_network(config)
    rng = rng if rng is not None else np.random.default_rng(seed)
    pipelines = []
    for i in range(network.n_nodes):
        length = int(network.pipeline_len[i])
        if network.infinite[i]:
            pipelines.append(np.zeros(length, dtype=np.int64))
            continue
        slots = np.array(
            [network.initial_distribution(i, j).sample_units(rng) for j in range(length)],
            dtype=np.int64,
        )
        pipelines.append(slots)
    return PipelineState(tuple(pipelines), np.zeros(network.n_nodes, dtype=np.int64), 0)


def sample_uncertainty(config: Union[Network, NetworkConfig], rng: np.random.Generator) -> Realization:
    network = as_network(config)
    demand = np.zeros(network.n_nodes, dtype=np.int64)
    production = np.zeros(network.n_nodes, dtype=np.int64)
    for i, spec in enumerate(network.config.nodes):
        if spec.demand is not None:
            demand[i] = spec.demand.sample_units(rng)
        if spec.production is not None:
            production[i] = spec.production.sample_units(rng)
    return Realization(demand, production)


def shipping_capacity(network: Network, state: PipelineState) -> np.ndarray:
    """Units each node can send out this period; inf for infinite suppliers."""
    avail = np.empty(network.n_nodes, dtype=float)
    for i in range(network.n_nodes):
        if network.infinite[i]:
            avail[i] = np.inf
            continue
        pipe = state.pipelines[i]
        arriving = pipe[1] if len(pipe) > 1 else 0
        avail[i] = pipe[0] + arriving + network.guaranteed_production[i]
    return avail


def apply_proportional_fulfillment(config: Union[Network, NetworkConfig], state: PipelineState,
                                   requested: Action) -> Action:
    """
    Scale down requests of every over-committed source to what it can ship.

    Integerization is largest remainder; equal remainders go first to the
    link with the smaller floored allocation, then to the lower link index.
    Index order alone would turn requests (5, 3) on 4 units into (3, 1), not (2, 2).
    """
    network = as_network(config)
    requested = np.asarray(requested, dtype=np.int64)
    shipped = requested.copy()
    avail = shipping_capacity(network, state)
    for i in range(network.n_nodes):
        out = network.out_links[i]
        if not out or np.isinf(avail[i]):
            continue
        total = int(requested[out].sum())
        budget = int(avail[i])
        if total <= budget:
            continue
        scaled = requested[out] * (budget / total)
        floors = np.floor(scaled).astype(np.int64)
        remainders = scaled - floors
        missing = budget - int(floors.sum())
        order = sorted(range(len(out)), key=lambda k: (-round(remainders[k], 12), floors[k], out[k]))
        for k in order[:missing]:
            floors[k] += 1
        shipped[out] = floors
        logger.debug(f"Rationed node {network.node_ids[i]}: requested {total}, available {budget}")
    return shipped


def check_action(network: Network, state: PipelineState, action: Action) -> None:
    if action.shape != (network.n_links,):
        raise ContractViolation(f"action has shape {action.shape}, expected ({network.n_links},)")
    # rationing may legitimately cut a shipment below min_order
    if np.any(action < 0) or np.any(action > network.max_order):
        raise ContractViolation("action outside link order bounds")
    avail = shipping_capacity(network, state)
    for i in range(network.n_nodes):
        out = network.out_links[i]
        if out and action[out].sum() > avail[i]:
            raise ContractViolation(
                f"node {network.node_ids[i]} ships {int(action[out].sum())} but has {avail[i]:g}; "
                f"apply proportional fulfillment first"
            )


def step(config: Union[Network, NetworkConfig], state: PipelineState, action: Action,
         real: Realization) -> Tuple[PipelineState, RewardBreakdown]:
    """Advance one period. Pure in (state, action, realization)."""
    network = as_network(config)
    x = np.asarray(action, dtype=np.int64)
    check_action(network, state, x)

    n = network.n_nodes
    rs, tsc, hsc, bpc = (np.zeros(n) for _ in range(4))
    sales = np.zeros(n, dtype=np.int64)
    spilled = np.zeros(n, dtype=np.int64)
    backlog = state.backlog.copy()
    pipelines: List[np.ndarray] = []

    ordered = x > 0
    for e in range(network.n_links):
        tsc[network.dst[e]] += network.fixed_cost[e] * ordered[e] + network.variable_cost[e] * x[e]

    for i in range(n):
        pipe = state.pipelines[i]
        length = len(pipe)
        if network.infinite[i]:
            pipelines.append(pipe.copy())
            continue

        zero_lead_in = sum(int(x[e]) for e in network.in_links[i] if network.lead[e] == 0)
        out = sum(int(x[e]) for e in network.out_links[i])
        arriving = int(pipe[1]) if length > 1 else 0
        on_hand = int(pipe[0]) + arriving + int(real.production[i]) + zero_lead_in - out

        owed = int(real.demand[i])
        if network.is_backorder[i]:
            owed += int(state.backlog[i])
        sold = min(owed, on_hand)
        leftover = on_hand - sold
        kept = int(min(network.capacity[i], leftover))
        spill = leftover - kept

        sales[i] = sold
        spilled[i] = spill
        rs[i] = network.price[i] * sold
        hsc[i] = network.holding[i] * kept + network.spillage[i] * spill
        if network.is_backorder[i]:
            backlog[i] = owed - sold
            bpc[i] = network.backorder_cost[i] * backlog[i]

        rotated = np.zeros(length, dtype=np.int64)
        rotated[0] = kept
        rotated[1:length - 1] = pipe[2:length]
        for e in network.in_links[i]:
            lead = int(network.lead[e])
            if lead > 0:
                rotated[lead] += x[e]
        pipelines.append(rotated)

    next_state = PipelineState(tuple(pipelines), backlog, state.period + 1)
    return next_state, RewardBreakdown(rs, tsc, hsc, bpc, sales, spilled)


def inventory_position(config: Union[Network, NetworkConfig], state: PipelineState, node: Union[int, str],
                       horizon: int) -> int:
    """On-hand plus the first `horizon` pipeline slots, net of backlog."""
    network = as_network(config)
    if isinstance(node, str):
        if node not in network.index:
            raise ContractViolation(f"unknown node {node}")
        node = network.index[node]
    if not 0 <= node < network.n_nodes:
        raise ContractViolation(f"unknown node index {node}")
    pipe = state.pipelines[node]
    if horizon < 0 or horizon > len(pipe):
        raise ContractViolation(f"horizon {horizon} outside pipeline of length {len(pipe)}")
    position = int(pipe[:horizon + 1].sum())
    if network.is_backorder[node]:
        position -= int(state.backlog[node])
    return position


def state_vector(config: Union[Network, NetworkConfig], state: PipelineState) -> np.ndarray:
    network = as_network(config)
    parts = [state.pipelines[i] for i in network.tracked_nodes]
    parts.append(state.backlog[network.backorder_nodes])
    return np.concatenate(parts).astype(float)


def network_inventory(network: Network, state: PipelineState) -> int:
    return int(sum(state.pipelines[i].sum() for i in network.tracked_nodes))


class InventoryEnv:
    """
    Stateful wrapper with its own generators.

    Demand and reset draws come from generators derived from the episode
    seed only, so two policies run on the same seeds see identical demand.
    """

    def __init__(self, config: Union[Network, NetworkConfig], seed: int = 0, log_trajectory: bool = False):
        self.network = as_network(config)
        self.seed = seed
        self.log_trajectory = log_trajectory
        self.state: Optional[PipelineState] = None
        self._demand_rng: Optional[np.random.Generator] = None
        self.rows: List[Dict] = []

    def reset(self, seed: Optional[int] = None) -> PipelineState:
        if seed is not None:
            self.seed = seed
        init_seq, demand_seq = np.random.SeedSequence(self.seed).spawn(2)
        self._demand_rng = np.random.default_rng(demand_seq)
        self.state = reset(self.network, rng=np.random.default_rng(init_seq))
        return self.state

    def sample(self) -> Realization:
        return sample_uncertainty(self.network, self._demand_rng)

    def step(self, requested: Action) -> Tuple[PipelineState, RewardBreakdown, Realization, bool]:
        """Fulfil, sample, advance. Returns (state, breakdown, realization, rationed)."""
        if self.state is None:
            raise ContractViolation("call reset() before step()")
        shipped = apply_proportional_fulfillment(self.network, self.state, requested)
        rationed = not np.array_equal(shipped, np.asarray(requested, dtype=np.int64))
        real = self.sample()
        prev = self.state
        self.state, breakdown = step(self.network, prev, shipped, real)
        if self.log_trajectory:
            self._log(prev, shipped, real, breakdown)
        return self.state, breakdown, real, rationed

    def _log(self, state: PipelineState, action: Action, real: Realization, breakdown: RewardBreakdown) -> None:
        network = self.network
        width = int(network.pipeline_len.max())
        per_node = breakdown.per_node
        for i, node_id in enumerate(network.node_ids):
            pipe = state.pipelines[i]
            row = {"period": state.period, "node": node_id, "on_hand": int(pipe[0])}
            for j in range(1, width):
                row[f"pipeline_{j}"] = int(pipe[j]) if j < len(pipe) else 0
            for e, name in enumerate(network.link_names):
                row[f"x[{name}]"] = int(action[e])
            row.update({
                "demand": int(real.demand[i]),
                "rs": float(breakdown.rs[i]),
                "tsc": float(breakdown.tsc[i]),
                "hsc": float(breakdown.hsc[i]),
                "reward": float(per_node[i]),
            })
            self.rows.append(row)

    def trajectory_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


@dataclass
class EpisodeResult:
    rewards: np.ndarray
    # summed over steps and nodes
    revenue: float
    ordering_cost: float
    holding_cost: float
    backorder_cost: float
    demands: np.ndarray
    rationed_steps: int = 0
    trajectory: Optional[pd.DataFrame] = None

    @property
    def mean_reward(self) -> float:
        return float(self.rewards.mean())


def simulate_episode(config: Union[Network, NetworkConfig], policy, seed: int, steps: int,
                     log_trajectory: bool = False) -> EpisodeResult:
    """Run policy (a callable state -> action) for steps periods from reset(seed)."""
    env = InventoryEnv(config, seed=seed, log_trajectory=log_trajectory)
    state = env.reset()
    rewards = np.zeros(steps)
    totals = np.zeros(4)
    demands = np.zeros((steps, env.network.n_nodes), dtype=np.int64)
    rationed_steps = 0
    for t in range(steps):
        state, breakdown, real, rationed = env.step(policy(state))
        rewards[t] = breakdown.total
        totals += [breakdown.rs.sum(), breakdown.tsc.sum(), breakdown.hsc.sum(), breakdown.bpc.sum()]
        demands[t] = real.demand
        rationed_steps += int(rationed)
    return EpisodeResult(rewards, *map(float, totals), demands, rationed_steps,
                         env.trajectory_frame() if log_trajectory else None)


def episode_seeds(base_seed: int, runs: int, episodes: int) -> List[List[int]]:
    """Per run, per episode reset seeds; equal inputs give equal demand traces."""
    return [
        [int(np.random.SeedSequence([base_seed, r, k]).generate_state(1)[0]) for k in range(episodes)]
        for r in range(runs)
    ]
