"""
heuristics/base_stock.py
Per-link (s, S) base stock policies and the simulation grid search that tunes them.

Every link is tuned on its own surrogate network: an infinite supplier feeding
the link's target node, everything else (lost sales, fixed costs, capacity)
unchanged. A warehouse target is turned into a retailer facing the summed
demand of the retailers it serves.
"""
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from env.distributions import Distribution, Normal
from env.errors import HeuristicError
from env.network import LinkSpec, Network, NetworkConfig, NodeSpec
from env.simulator import (
    Action,
    PipelineState,
    as_network,
    episode_seeds,
    inventory_position,
    simulate_episode,
)
from store import append_jsonl, read_jsonl

logger = logging.getLogger(__name__)

PARALLELISM = int(os.environ.get("PARL_PARALLELISM", 8))
TIE_TOL = 1e-12


@dataclass(frozen=True)
class BaseStockParams:
    # link name -> (s, S)
    levels: Dict[str, Tuple[int, int]]

    def __post_init__(self):
        for link, (s, S) in self.levels.items():
            if int(s) != s or int(S) != S or s < 0 or S < 0:
                raise HeuristicError(f"link {link}: levels must be integers >= 0, got ({s}, {S})")
            if s > S:
                raise HeuristicError(f"link {link}: reorder point {s} above order-up-to level {S}")

    def to_records(self) -> List[Dict]:
        return [{"link": link, "s": int(s), "S": int(S)} for link, (s, S) in self.levels.items()]

    @classmethod
    def from_records(cls, records: Sequence[Dict]) -> "BaseStockParams":
        return cls({r["link"]: (int(r["s"]), int(r["S"])) for r in records})


def base_stock_action(params: BaseStockParams, state: PipelineState,
                      config: Union[Network, NetworkConfig]) -> Action:
    """Per link: max(0, S - IP) when IP <= s, else 0; IP over the link's lead time."""
    network = as_network(config)
    action = np.zeros(network.n_links, dtype=np.int64)
    for e, name in enumerate(network.link_names):
        if name not in params.levels:
            raise HeuristicError(f"no base stock levels for link {name}")
        s, S = params.levels[name]
        position = inventory_position(network, state, int(network.dst[e]), int(network.lead[e]))
        order = max(0, S - position) if position <= s else 0
        action[e] = min(order, int(network.max_order[e]))
    return action


class BaseStockPolicy:
    def __init__(self, params: BaseStockParams, config: Union[Network, NetworkConfig]):
        self.params = params
        self.network = as_network(config)

    def __call__(self, state: PipelineState) -> Action:
        return base_stock_action(self.params, state, self.network)


def _link_index(network: Network, link: Union[int, str]) -> int:
    if isinstance(link, str):
        if link not in network.link_names:
            raise HeuristicError(f"unknown link {link}")
        return network.link_names.index(link)
    if not 0 <= link < network.n_links:
        raise HeuristicError(f"unknown link index {link}")
    return int(link)


def _aggregate_demand(network: Network, node: int) -> Tuple[Distribution, float]:
    """Summed per-period demand and mean price of the retailers a warehouse serves."""
    served = [int(network.dst[e]) for e in network.out_links[node] if network.kind[network.dst[e]] == "retailer"]
    if not served:
        raise HeuristicError(f"warehouse {network.node_ids[node]} serves no retailer")
    dists = [network.config.nodes[r].demand for r in served]
    mu = sum(d.mean() for d in dists)
    sigma = math.sqrt(sum(d.std() ** 2 for d in dists))
    price = float(np.mean([network.price[r] for r in served]))
    return Normal(mu, max(sigma, 1e-9)), price


def surrogate_config(config: Union[Network, NetworkConfig], link: Union[int, str]) -> NetworkConfig:
    """One infinite supplier and the link's target node, as a 1S-1R network."""
    network = as_network(config)
    e = _link_index(network, link)
    target = network.config.nodes[int(network.dst[e])]
    if target.kind == "retailer":
        node = target
    else:
        demand, price = _aggregate_demand(network, int(network.dst[e]))
        node = NodeSpec(id=target.id, kind="retailer", holding_cost=target.holding_cost, capacity=target.capacity,
                        spillage_cost=target.spillage_cost, price=price, demand=demand,
                        initial_inventory=target.initial_inventory)
    spec = network.config.links[e]
    source_id = "SRC" if target.id != "SRC" else "SRC0"
    return NetworkConfig(
        name=f"{network.config.name}-surrogate-{spec.name}",
        nodes=(NodeSpec(id=source_id, kind="supplier", infinite_supply=True), node),
        links=(LinkSpec(source=source_id, target=target.id, lead_time=spec.lead_time, fixed_cost=spec.fixed_cost,
                        variable_cost=spec.variable_cost, max_order=spec.max_order, min_order=spec.min_order,
                        initial_inventory=spec.initial_inventory),),
        initial_inventory=network.config.initial_inventory,
    )


def _grid_top(network: Network) -> int:
    """Twice the lead-time demand plus three sigma, on the surrogate link."""
    demand = network.config.nodes[int(network.dst[0])].demand
    horizon = int(network.lead[0]) + 1
    return int(math.ceil(2 * (demand.mean() * horizon + 3 * demand.std() * math.sqrt(horizon))))


def default_grid(config: Union[Network, NetworkConfig]) -> List[Tuple[int, int]]:
    """Coarse grid: S on a stride of top//16, s up to three strides below S."""
    top = _grid_top(as_network(config))
    stride = max(1, top // 16)
    return [(S - k * stride, S) for S in range(0, top + 1, stride) for k in range(4) if S - k * stride >= 0]


def _refine(best: Tuple[int, int], stride: int) -> List[Tuple[int, int]]:
    s0, S0 = best
    return [(s, S) for S in range(max(0, S0 - stride + 1), S0 + stride)
            for s in range(max(0, s0 - stride + 1), min(S, s0 + stride - 1) + 1)]


@dataclass
class BaseStockChoice:
    s: int
    S: int
    table: pd.DataFrame = field(repr=False)

    def __iter__(self) -> Iterator[int]:
        return iter((self.s, self.S))


def _score(network: Network, name: str, candidate: Tuple[int, int], seeds: List[int], steps: int) -> float:
    policy = BaseStockPolicy(BaseStockParams({name: candidate}), network)
    return float(np.mean([simulate_episode(network, policy, seed, steps).mean_reward for seed in seeds]))


def _evaluate(network: Network, grid: Sequence[Tuple[int, int]], seeds: List[int], steps: int,
              parallelism: int) -> pd.DataFrame:
    name = network.link_names[0]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        scores = list(pool.map(lambda c: _score(network, name, c, seeds, steps), grid))
    return pd.DataFrame({"s": [c[0] for c in grid], "S": [c[1] for c in grid], "mean_reward": scores})


def _winner(table: pd.DataFrame) -> Tuple[int, int]:
    best = table["mean_reward"].max()
    tied = table[table["mean_reward"] >= best - TIE_TOL].sort_values(["S", "s"])
    return int(tied.iloc[0]["s"]), int(tied.iloc[0]["S"])


def grid_search_base_stock(config: Union[Network, NetworkConfig], link: Union[int, str],
                           grid: Optional[Sequence[Tuple[int, int]]] = None, runs: int = 1, episodes: int = 8,
                           steps: int = 256, seed: int = 0, parallelism: Optional[int] = None) -> BaseStockChoice:
    """
    Best (s, S) for one link by simulation on its surrogate network.

    Every candidate sees the same episode seeds. The highest mean per-step
    reward wins; ties go to the smaller S, then the smaller s. Without an
    explicit grid a coarse grid is searched and then refined around its winner.
    """
    network = as_network(config)
    e = _link_index(network, link)
    surrogate = Network(surrogate_config(network, e))
    seeds = [s for run in episode_seeds(seed, runs, episodes) for s in run]
    workers = parallelism or PARALLELISM

    if grid is not None:
        candidates = sorted({(int(s), int(S)) for s, S in grid if s <= S})
        if not candidates:
            raise HeuristicError(f"empty base stock grid for link {network.link_names[e]}")
        table = _evaluate(surrogate, candidates, seeds, steps, workers)
    else:
        coarse = default_grid(surrogate)
        stride = max(1, _grid_top(surrogate) // 16)
        table = _evaluate(surrogate, coarse, seeds, steps, workers)
        fine = [c for c in _refine(_winner(table), stride) if c not in set(coarse)]
        if fine:
            table = pd.concat([table, _evaluate(surrogate, fine, seeds, steps, workers)], ignore_index=True)

    s, S = _winner(table)
    logger.info(f"Base stock {network.link_names[e]}: s={s}, S={S} "
                f"({table['mean_reward'].max():.3f} per step over {len(table)} candidates)")
    return BaseStockChoice(s, S, table.assign(link=network.link_names[e]))


def tune_base_stock(config: Union[Network, NetworkConfig], **budget) -> Tuple[BaseStockParams, pd.DataFrame]:
    """Grid search every link; returns the params and all evaluated candidates."""
    network = as_network(config)
    levels, tables = {}, []
    for e, name in enumerate(network.link_names):
        choice = grid_search_base_stock(network, e, **budget)
        levels[name] = (choice.s, choice.S)
        tables.append(choice.table)
    return BaseStockParams(levels), pd.concat(tables, ignore_index=True)


def dump_params(params: BaseStockParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.exists():
        path.unlink()
    return append_jsonl(path, params.to_records())


def load_params(path: Union[str, Path]) -> BaseStockParams:
    return BaseStockParams.from_records(read_jsonl(path))
