"""
heuristics/decomposition.py
Decomposition-aggregation echelon order-up-to levels for tree networks with
normal demand.

Two-echelon networks (suppliers feeding retailers) get the newsvendor level
per retailer. Three-echelon networks are split into supplier-warehouse-retailer
paths; each path yields a retailer level and a warehouse echelon level, and
the warehouse levels of all paths through a warehouse are merged by matching
their expected shortfalls. A retailer served by several warehouses is
assigned to the one with the shortest lead time.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

import numpy as np
from scipy import stats

from env.distributions import Normal
from env.errors import HeuristicError
from env.network import Network, NetworkConfig
from env.simulator import Action, PipelineState, as_network, inventory_position

logger = logging.getLogger(__name__)

BISECTION_TOL = 1e-10
BISECTION_STEPS = 200


def expected_shortfall(S, mu: float, sigma: float):
    """E[D - S]^+ for D ~ N(mu, sigma); sigma = 0 is the point mass at mu."""
    S = np.asarray(S, dtype=float)
    if sigma == 0:
        value = np.maximum(mu - S, 0.0)
    else:
        z = (S - mu) / sigma
        value = sigma * (stats.norm.pdf(z) - z * stats.norm.sf(z))
    return float(value) if value.ndim == 0 else value


def shortfall_inverse(y: float, mu: float, sigma: float) -> float:
    """min{S : E[D - S]^+ <= y}, by bisection on the decreasing shortfall."""
    if sigma == 0:
        return mu - y
    if y <= 0:
        raise HeuristicError(f"shortfall target must be positive for sigma > 0, got {y}")
    lo = mu - y - 1.0
    hi = mu + 10.0 * sigma
    while expected_shortfall(hi, mu, sigma) > y:
        hi += 10.0 * sigma
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if expected_shortfall(mid, mu, sigma) <= y:
            hi = mid
        else:
            lo = mid
        if hi - lo < BISECTION_TOL:
            break
    return hi


@dataclass
class DALevels:
    # retailer id -> S_r
    retailer: Dict[str, float] = field(default_factory=dict)
    # warehouse id -> S_w after aggregation
    warehouse: Dict[str, float] = field(default_factory=dict)
    # retailer id -> S_{w_r}, echelon level of the path's warehouse
    path_echelon: Dict[str, float] = field(default_factory=dict)
    # retailer id -> s_{w_r} = S_{w_r} - S_r
    path_local: Dict[str, float] = field(default_factory=dict)
    # retailer id -> name of the link it orders on
    primary_link: Dict[str, str] = field(default_factory=dict)

    def units(self, node: str) -> int:
        level = self.retailer[node] if node in self.retailer else self.warehouse[node]
        return max(0, int(math.floor(level + 0.5)))

    def to_records(self) -> List[Dict]:
        records = [{"node": r, "kind": "retailer", "level": v, "units": self.units(r),
                    "link": self.primary_link[r]} for r, v in self.retailer.items()]
        records += [{"node": w, "kind": "warehouse", "level": v, "units": self.units(w)}
                    for w, v in self.warehouse.items()]
        return records


def _normal_demand(network: Network, r: int) -> Tuple[float, float]:
    demand = network.config.nodes[r].demand
    if not isinstance(demand, Normal):
        raise HeuristicError(f"retailer {network.node_ids[r]} demand {demand} is not normal")
    return demand.mu, demand.sigma


def _primary_link(network: Network, node: int) -> int:
    links = network.in_links[node]
    if not links:
        raise HeuristicError(f"node {network.node_ids[node]} has no supply link")
    return min(links, key=lambda e: (int(network.lead[e]), e))


def _underage(network: Network, r: int, path: List[int]) -> float:
    """Revenue per unit minus variable ordering costs along the path, plus backorder penalty."""
    b = network.price[r] - sum(network.variable_cost[e] for e in path)
    if network.is_backorder[r]:
        b += network.backorder_cost[r]
    return float(b)


def _ratio(num: float, den: float, node: str) -> float:
    if den <= 0 or not 0.0 < num / den < 1.0:
        raise HeuristicError(f"retailer {node}: quantile {num}/{den} outside (0, 1)")
    return num / den


def da_levels(config: Union[Network, NetworkConfig]) -> DALevels:
    network = as_network(config)
    levels = DALevels()
    retailers = [i for i in range(network.n_nodes) if network.kind[i] == "retailer"]
    if not retailers:
        raise HeuristicError("network has no retailer")
    shortfall_by_warehouse: Dict[int, float] = {}
    paths_by_warehouse: Dict[int, List[int]] = {}

    for r in retailers:
        rid = network.node_ids[r]
        mu, sigma = _normal_demand(network, r)
        e_r = _primary_link(network, r)
        upstream = int(network.src[e_r])
        levels.primary_link[rid] = network.link_names[e_r]
        L_r = int(network.lead[e_r])
        h_r = float(network.holding[r])

        if network.kind[upstream] == "supplier":
            b = _underage(network, r, [e_r])
            q = _ratio(b, b + h_r, rid)
            levels.retailer[rid] = float(stats.norm.ppf(q, mu * (L_r + 1), sigma * math.sqrt(L_r + 1)))
            continue
        if network.kind[upstream] != "warehouse":
            raise HeuristicError(f"retailer {rid} is fed by a retailer; not a tree network")

        w = upstream
        e_w = _primary_link(network, w)
        if network.kind[int(network.src[e_w])] != "supplier" or len(network.in_links[w]) > 1:
            raise HeuristicError(f"warehouse {network.node_ids[w]} must have one supplier link")
        L_w = int(network.lead[e_w])
        h_w = float(network.holding[w])
        b = _underage(network, r, [e_r, e_w])

        levels.retailer[rid] = float(stats.norm.ppf(_ratio(b + h_w, b + h_r, rid), mu * (L_r + 1),
                                                    sigma * math.sqrt(L_r + 1)))
        z = 0.5 * stats.norm.ppf(_ratio(b, b + h_r, rid)) + 0.5 * stats.norm.ppf(_ratio(b, b + h_w, rid))
        q_w = float(stats.norm.cdf(z))
        horizon = L_r + L_w + 1
        echelon = float(stats.norm.ppf(q_w, mu * horizon, sigma * math.sqrt(horizon)))
        local = echelon - levels.retailer[rid]
        levels.path_echelon[rid] = echelon
        levels.path_local[rid] = local
        shortfall_by_warehouse[w] = shortfall_by_warehouse.get(w, 0.0) + expected_shortfall(
            local, mu * L_w, sigma * math.sqrt(L_w))
        paths_by_warehouse.setdefault(w, []).append(r)

    for w, total in shortfall_by_warehouse.items():
        served = paths_by_warehouse[w]
        L_w = int(network.lead[_primary_link(network, w)])
        params = [_normal_demand(network, r) for r in served]
        mu_w = sum(m for m, _ in params) * L_w
        sigma_w = math.sqrt(sum(s ** 2 for _, s in params) * L_w)
        levels.warehouse[network.node_ids[w]] = shortfall_inverse(total, mu_w, sigma_w)

    logger.debug(f"DA levels: retailers {levels.retailer}, warehouses {levels.warehouse}")
    return levels


def da_action(levels: DALevels, state: PipelineState, config: Union[Network, NetworkConfig]) -> Action:
    """Order up to the level on each primary link; inventory positions over the link's lead time."""
    network = as_network(config)
    action = np.zeros(network.n_links, dtype=np.int64)
    primary = set(levels.primary_link.values())
    for e, name in enumerate(network.link_names):
        node = network.node_ids[int(network.dst[e])]
        if node in levels.retailer and name not in primary:
            continue
        if node not in levels.retailer and node not in levels.warehouse:
            continue
        position = inventory_position(network, state, int(network.dst[e]), int(network.lead[e]))
        order = max(0, levels.units(node) - position)
        action[e] = min(max(order, 0), int(network.max_order[e]))
    return action


class DAPolicy:
    def __init__(self, levels: DALevels, config: Union[Network, NetworkConfig]):
        self.levels = levels
        self.network = as_network(config)

    def __call__(self, state: PipelineState) -> Action:
        return da_action(self.levels, state, self.network)
