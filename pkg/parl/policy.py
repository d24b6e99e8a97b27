"""
parl/policy.py
Greedy one-step policy over a fitted critic.

The action maximises the sample-weighted reward plus discounted critic value
of the next state. Small action spaces are enumerated; larger ones go through
the step MILP and branch-and-bound (or an external solver).
"""
import logging
import statistics
import time
from typing import List, Literal, Optional, Union

import numpy as np

from env.errors import SolverError
from env.network import Network, NetworkConfig
from env.simulator import Action, PipelineState, as_network, shipping_capacity
from mip.step_problem import StepOptions, build_step_problem, solution_from_action
from parl.sampling import SampleSet, SamplingSpec
from parl.rollout import random_action
from solver.branch_and_bound import SolveResult, solve_branch_and_bound
from solver.enumeration import DEFAULT_CAP, solve_enumeration
from solver.external import solve_external
from valuenet.relu_net import ReLUNet

logger = logging.getLogger(__name__)

SolverChoice = Literal["auto", "enumeration", "bnb", "external"]


def _zero_action(network: Network) -> Action:
    return np.zeros(network.n_links, dtype=np.int64)


def _starting_action(network: Network, state: PipelineState) -> Optional[Action]:
    """Smallest orders allowed on every link, if the sources can ship them."""
    action = network.min_order.astype(np.int64)
    avail = shipping_capacity(network, state)
    for i in range(network.n_nodes):
        out = network.out_links[i]
        if out and action[out].sum() > avail[i]:
            return None
    return action


def greedy_decision(state: PipelineState, net: ReLUNet, samples: SampleSet,
                    config: Union[Network, NetworkConfig], gamma: float, solver: SolverChoice = "auto",
                    time_limit: Optional[float] = None, options: Optional[StepOptions] = None,
                    external_command: Optional[str] = None,
                    enumeration_cap: Optional[int] = None) -> SolveResult:
    network = as_network(config)
    samples = samples.normalized()
    cap = DEFAULT_CAP if enumeration_cap is None else enumeration_cap
    if solver == "auto":
        solver = "enumeration" if network.action_space_size() <= cap else "bnb"

    if solver == "enumeration":
        return solve_enumeration(state, samples, net, network, gamma, cap=cap)

    problem = build_step_problem(state, samples, net, network, gamma, options)
    if solver == "external":
        if not external_command:
            raise SolverError("solver='external' needs an external_command")
        return solve_external(problem.model, external_command, problem.x_vars, time_limit)
    if solver != "bnb":
        raise SolverError(f"unknown solver choice {solver}")

    start = _starting_action(network, state)
    incumbent = None
    if start is not None:
        incumbent = solution_from_action(problem, state, start, samples, net)
    result = solve_branch_and_bound(problem.model, time_limit, incumbent=incumbent, action_vars=problem.x_vars)
    logger.debug(f"B&B {result.status}: {result.nodes} nodes, gap {result.gap:.3g}, {result.elapsed:.3f}s")
    return result


def greedy_action(state: PipelineState, net: ReLUNet, samples: SampleSet,
                  config: Union[Network, NetworkConfig], gamma: float, solver: SolverChoice = "auto",
                  **kwargs) -> Action:
    """Argmax of the SAA objective; the zero action when no solution was found."""
    network = as_network(config)
    result = greedy_decision(state, net, samples, network, gamma, solver, **kwargs)
    if result.action is None:
        logger.warning(f"No solution ({result.status}) at period {state.period}; ordering nothing")
        return _zero_action(network)
    return result.action


class GreedyPolicy:
    """
    Callable policy around a fixed critic snapshot.

    Quantile sample sets do not depend on the state and are built once;
    random sets are redrawn at every decision from the policy's own generator.
    """

    def __init__(self, config: Union[Network, NetworkConfig], net: ReLUNet, gamma: float,
                 sampling: Optional[SamplingSpec] = None, solver: SolverChoice = "auto",
                 time_limit: Optional[float] = None, options: Optional[StepOptions] = None,
                 external_command: Optional[str] = None, seed: int = 0):
        self.network = as_network(config)
        self.net = net
        self.gamma = gamma
        self.sampling = sampling or SamplingSpec()
        self.solver = solver
        self.time_limit = time_limit
        self.options = options
        self.external_command = external_command
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._fixed = None if self.sampling.scheme == "random" else self.sampling.sample_set(self.network, self._rng)
        self.solve_times: List[float] = []
        self.fallbacks = 0

    def spawn(self, seed: int) -> "GreedyPolicy":
        """Same critic and settings, fresh generator and timings."""
        return GreedyPolicy(self.network, self.net, self.gamma, self.sampling, self.solver, self.time_limit,
                            self.options, self.external_command, seed)

    def samples(self) -> SampleSet:
        return self._fixed if self._fixed is not None else self.sampling.sample_set(self.network, self._rng)

    def __call__(self, state: PipelineState) -> Action:
        start = time.perf_counter()
        result = greedy_decision(state, self.net, self.samples(), self.network, self.gamma, self.solver,
                                 time_limit=self.time_limit, options=self.options,
                                 external_command=self.external_command)
        self.solve_times.append(time.perf_counter() - start)
        if result.action is None:
            self.fallbacks += 1
            logger.warning(f"No solution ({result.status}) at period {state.period}; ordering nothing")
            return _zero_action(self.network)
        return result.action

    @property
    def median_latency(self) -> float:
        return statistics.median(self.solve_times) if self.solve_times else 0.0


class RandomPolicy:
    """Uniform random feasible orders; the policy before any critic exists."""

    def __init__(self, config: Union[Network, NetworkConfig], seed: int = 0):
        self.network = as_network(config)
        self._rng = np.random.default_rng(seed)
        self.solve_times: List[float] = []

    def spawn(self, seed: int) -> "RandomPolicy":
        return RandomPolicy(self.network, seed)

    def __call__(self, state: PipelineState) -> Action:
        return random_action(self.network, state, self._rng)
