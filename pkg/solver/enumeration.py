"""
solver/enumeration.py
Exhaustive oracle for the per-step decision: every integer action that the
sources can ship is scored through the simulator and the critic.
"""
import itertools
import logging
import math
import os
import time
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

from env.errors import SolverError
from env.network import Network, NetworkConfig
from env.simulator import PipelineState, as_network, shipping_capacity
from mip.step_problem import saa_objective_batch
from solver.branch_and_bound import SolveResult
from valuenet.relu_net import ReLUNet

if TYPE_CHECKING:
    from parl.sampling import SampleSet

logger = logging.getLogger(__name__)

DEFAULT_CAP = int(float(os.environ.get("PARL_ENUMERATION_CAP", 10 ** 6)))
TIE_TOL = 1e-9
CHUNK = 4096


def feasible_actions(network: Network, state: PipelineState) -> np.ndarray:
    """All integer actions within link bounds and source shipping capacity, lexicographic order."""
    ranges = [range(int(network.min_order[e]), int(network.max_order[e]) + 1) for e in range(network.n_links)]
    actions = np.array(list(itertools.product(*ranges)), dtype=np.int64).reshape(-1, network.n_links)
    avail = shipping_capacity(network, state)
    keep = np.ones(actions.shape[0], dtype=bool)
    for i in range(network.n_nodes):
        out = network.out_links[i]
        if out and not np.isinf(avail[i]):
            keep &= actions[:, out].sum(axis=1) <= avail[i]
    return actions[keep]


def solve_enumeration(state: PipelineState, samples: "SampleSet", net: ReLUNet,
                      config: Union[Network, NetworkConfig], gamma: float,
                      cap: Optional[int] = None) -> SolveResult:
    network = as_network(config)
    cap = DEFAULT_CAP if cap is None else cap
    size = network.action_space_size()
    if size > cap:
        raise SolverError(f"action space has {size} actions, enumeration cap is {cap}",
                          hint="use solve_branch_and_bound for larger networks")
    start = time.perf_counter()
    actions = feasible_actions(network, state)
    if actions.shape[0] == 0:
        return SolveResult(None, -math.inf, -math.inf, math.inf, "infeasible", nodes=0,
                           elapsed=time.perf_counter() - start)

    values = np.concatenate([
        saa_objective_batch(state, actions[k:k + CHUNK], samples, net, network, gamma)
        for k in range(0, actions.shape[0], CHUNK)
    ])
    best = float(values.max())
    # first action within tolerance of the best is the lexicographically smallest
    pick = int(np.flatnonzero(values >= best - TIE_TOL)[0])
    elapsed = time.perf_counter() - start
    logger.debug(f"Enumerated {actions.shape[0]} actions in {elapsed:.3f}s, best {best:.6g}")
    return SolveResult(actions[pick].copy(), float(values[pick]), best, 0.0, "optimal",
                       nodes=int(actions.shape[0]), elapsed=elapsed)
