"""
bench/structure.py
Order-up-to structure of a learned policy on one link.

Collects (inventory position, order) pairs on states the policy visits and
fits order = min(cap, max(0, S - IP)) by least squares over S.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import optimize

from env.errors import ExperimentError
from env.network import Network, NetworkConfig
from env.simulator import InventoryEnv, as_network, inventory_position

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OrderUpToFit:
    level: float
    r2: float
    samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def visited_orders(config: Union[Network, NetworkConfig], policy, link: int = 0,
                   seeds: Iterable[int] = (0,), steps: int = 256) -> pd.DataFrame:
    """One row per visited state: seed, period, inventory position at the link's target, order on the link."""
    network = as_network(config)
    if not 0 <= link < network.n_links:
        raise ExperimentError(f"link index {link} outside 0..{network.n_links - 1}")
    node, lead = int(network.dst[link]), int(network.lead[link])
    rows = []
    for seed in seeds:
        env = InventoryEnv(network, seed=seed)
        state = env.reset()
        for t in range(steps):
            action = np.asarray(policy(state))
            rows.append({
                "seed": seed,
                "period": t,
                "inventory_position": inventory_position(network, state, node, lead),
                "order": int(action[link]),
            })
            state, _, _, _ = env.step(action)
    return pd.DataFrame(rows, columns=["seed", "period", "inventory_position", "order"])


def fit_order_up_to(positions, orders, cap: Optional[float] = None,
                    bounds: Optional[Tuple[float, float]] = None) -> OrderUpToFit:
    ip = np.asarray(positions, dtype=float).reshape(-1)
    y = np.asarray(orders, dtype=float).reshape(-1)
    if ip.size == 0 or ip.size != y.size:
        raise ExperimentError(f"need matching, non-empty positions and orders (got {ip.size} and {y.size})")
    upper_cap = np.inf if cap is None else float(cap)

    def sse(level: float) -> float:
        return float(np.sum((y - np.clip(level - ip, 0.0, upper_cap)) ** 2))

    lo, hi = bounds if bounds is not None else (ip.min(), ip.max() + y.max())
    grid = np.arange(math.floor(lo), math.ceil(hi) + 1, dtype=float)
    best = float(min(grid, key=sse))
    refined = optimize.minimize_scalar(sse, bounds=(best - 1.0, best + 1.0), method="bounded",
                                       options={"xatol": 1e-6})
    level = float(refined.x) if sse(refined.x) < sse(best) else best

    total = float(np.sum((y - y.mean()) ** 2))
    residual = sse(level)
    if total > 0:
        r2 = 1.0 - residual / total
    else:
        r2 = 1.0 if residual == 0 else 0.0
    logger.info(f"Order-up-to fit on {ip.size} states: S={level:.2f}, R2={r2:.3f}")
    return OrderUpToFit(level=level, r2=r2, samples=int(ip.size))
