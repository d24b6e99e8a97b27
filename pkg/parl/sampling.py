"""
parl/sampling.py
Demand/production sample sets for the per-step SAA objective.

random_samples draws i.i.d. realizations with equal weight. quantile_samples
places eta quantile levels on every uncertain dimension and keeps the eta
heaviest combinations of the resulting product grid.
"""
import heapq
import logging
from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from env.distributions import Distribution, discretize
from env.errors import SamplingError
from env.network import Network, NetworkConfig
from env.simulator import Realization, as_network, sample_uncertainty

logger = logging.getLogger(__name__)

Scheme = Literal["random", "quantile"]
WeightRule = Literal["density", "uniform"]


@dataclass(frozen=True)
class SampleSet:
    realizations: Tuple[Realization, ...]
    weights: np.ndarray
    scheme: Scheme

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(self.realizations),):
            raise SamplingError(f"{len(self.realizations)} realizations but {weights.shape} weights")
        if len(self.realizations) == 0:
            raise SamplingError("sample set is empty")
        if not np.all(weights > 0) or not np.all(np.isfinite(weights)):
            raise SamplingError("sample weights must be positive and finite")
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.realizations)

    def normalized(self) -> "SampleSet":
        total = float(self.weights.sum())
        if abs(total - 1.0) <= 1e-12:
            return self
        return SampleSet(self.realizations, self.weights / total, self.scheme)

    def with_weights(self, weights: Sequence[float]) -> "SampleSet":
        return SampleSet(self.realizations, np.asarray(weights, dtype=float), self.scheme)

    def demand_matrix(self) -> np.ndarray:
        return np.stack([r.demand for r in self.realizations])


class SamplingSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    scheme: Scheme = "quantile"
    eta: int = Field(3, ge=1)
    weights: WeightRule = "density"

    def sample_set(self, config: Union[Network, NetworkConfig], rng: np.random.Generator) -> SampleSet:
        if self.scheme == "random":
            return random_samples(config, self.eta, rng)
        return quantile_samples(config, self.eta, self.weights)


def _check_eta(eta: int) -> int:
    if isinstance(eta, bool) or int(eta) != eta or eta < 1:
        raise SamplingError(f"eta must be a positive integer, got {eta}")
    return int(eta)


def random_samples(config: Union[Network, NetworkConfig], eta: int, rng: np.random.Generator) -> SampleSet:
    """eta i.i.d. draws of the period's uncertainty, each weighted 1/eta."""
    eta = _check_eta(eta)
    network = as_network(config)
    draws = tuple(sample_uncertainty(network, rng) for _ in range(eta))
    return SampleSet(draws, np.full(eta, 1.0 / eta), "random")


def uncertain_dimensions(network: Network) -> List[Tuple[str, int, Distribution]]:
    """(field, node index, distribution) for every non-constant demand or production."""
    dims = []
    for i, spec in enumerate(network.config.nodes):
        if spec.demand is not None and not spec.demand.is_constant:
            dims.append(("demand", i, spec.demand))
    for i, spec in enumerate(network.config.nodes):
        if spec.production is not None and not spec.production.is_constant:
            dims.append(("production", i, spec.production))
    return dims


def quantile_levels(eta: int) -> np.ndarray:
    """Midpoints (i - 0.5) / eta, i = 1..eta."""
    eta = _check_eta(eta)
    return (np.arange(1, eta + 1) - 0.5) / eta


def _dimension_grid(dist: Distribution, levels: np.ndarray, rule: WeightRule) -> Tuple[np.ndarray, np.ndarray]:
    try:
        points = np.asarray(dist.ppf(levels), dtype=float)
    except (NotImplementedError, ValueError) as e:
        raise SamplingError(f"cannot invert the CDF of {dist}: {e}")
    if not np.all(np.isfinite(points)):
        raise SamplingError(f"inverse CDF of {dist} is not finite on {levels.tolist()}")
    if rule == "uniform":
        weights = np.ones(len(levels))
    else:
        # density evaluated at the quantile level itself
        weights = np.asarray(dist.pdf(levels), dtype=float)
    return discretize(points), weights


def top_k_products(weights: Sequence[np.ndarray], k: int) -> List[Tuple[Tuple[int, ...], float]]:
    """
    The k index tuples with the largest weight product, heaviest first.

    Ties go to the lexicographically smaller index tuple. A best-first walk
    over per-dimension rankings, so only O(k * dim) tuples are touched.
    """
    dim = len(weights)
    if dim == 0:
        return [((), 1.0)]
    # rank each dimension by (weight descending, index ascending)
    ranks = [sorted(range(len(w)), key=lambda q, w=w: (-float(w[q]), q)) for w in weights]

    def entry(pos: Tuple[int, ...]):
        index = tuple(ranks[j][pos[j]] for j in range(dim))
        product = float(np.prod([weights[j][index[j]] for j in range(dim)]))
        return (-float(f"{product:.12e}"), index, pos, product)

    start = (0,) * dim
    heap = [entry(start)]
    seen = {start}
    picked = []
    while heap and len(picked) < k:
        _, index, pos, product = heapq.heappop(heap)
        picked.append((index, product))
        for j in range(dim):
            if pos[j] + 1 < len(ranks[j]):
                nxt = pos[:j] + (pos[j] + 1,) + pos[j + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, entry(nxt))
    return picked


def quantile_samples(config: Union[Network, NetworkConfig], eta: int,
                     weights: WeightRule = "density") -> SampleSet:
    """
    Quantile-grid sample set.

    Every uncertain dimension j gets points clamp-round(F_j^-1(q_i)) with
    q_i = (i - 0.5) / eta and weight f_j(q_i) (or 1 under weights="uniform").
    Of the eta**dim combinations the eta with the largest weight product are
    kept and renormalized. Constant demands and productions keep their value.
    """
    eta = _check_eta(eta)
    if weights not in ("density", "uniform"):
        raise SamplingError(f"unknown weight rule {weights}")
    network = as_network(config)
    dims = uncertain_dimensions(network)
    levels = quantile_levels(eta)
    grids = [_dimension_grid(dist, levels, weights) for _, _, dist in dims]
    for (field, i, dist), (_, w) in zip(dims, grids):
        if not np.any(w > 0):
            raise SamplingError(
                f"{field} of {network.node_ids[i]} ({dist}) has zero density on every level; use weights='uniform'"
            )

    base_demand = np.zeros(network.n_nodes, dtype=np.int64)
    base_production = np.zeros(network.n_nodes, dtype=np.int64)
    for i, spec in enumerate(network.config.nodes):
        if spec.demand is not None and spec.demand.is_constant:
            base_demand[i] = int(discretize(spec.demand.mean()))
        if spec.production is not None and spec.production.is_constant:
            base_production[i] = int(discretize(spec.production.mean()))

    picked = [(idx, w) for idx, w in top_k_products([w for _, w in grids], eta) if w > 0]
    realizations = []
    for index, _ in picked:
        demand, production = base_demand.copy(), base_production.copy()
        for (field, i, _), (points, _), q in zip(dims, grids, index):
            target = demand if field == "demand" else production
            target[i] = points[q]
        realizations.append(Realization(demand, production))
    pool_weights = np.array([w for _, w in picked], dtype=float)
    logger.debug(f"Quantile set: {len(dims)} uncertain dims, kept {len(picked)} of {eta}**{len(dims)} combinations")
    return SampleSet(tuple(realizations), pool_weights / pool_weights.sum(), "quantile")
