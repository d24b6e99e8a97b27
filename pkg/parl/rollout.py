"""
parl/rollout.py
Epsilon-greedy rollouts and discounted returns.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from env.errors import ContractViolation
from env.network import Network
from env.simulator import (
    Action,
    InventoryEnv,
    PipelineState,
    Realization,
    RewardBreakdown,
    apply_proportional_fulfillment,
    shipping_capacity,
    state_vector,
)

logger = logging.getLogger(__name__)

Policy = Callable[[PipelineState], Action]


@dataclass
class Transition:
    state: PipelineState
    action: Action
    reward: float
    next_state: PipelineState
    explored: bool
    rationed: bool
    breakdown: RewardBreakdown
    realization: Realization


@dataclass
class Trajectory:
    steps: List[Transition] = field(default_factory=list)
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.steps)

    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.steps], dtype=float)

    def explored(self) -> np.ndarray:
        return np.array([t.explored for t in self.steps], dtype=bool)

    def state_matrix(self, env: InventoryEnv) -> np.ndarray:
        return np.stack([state_vector(env.network, t.state) for t in self.steps])

    def demands(self) -> np.ndarray:
        return np.stack([t.realization.demand for t in self.steps])


def random_action(network: Network, state: PipelineState, rng: np.random.Generator) -> Action:
    """Each link uniform on [min_order, min(max_order, source capacity)]."""
    avail = shipping_capacity(network, state)
    action = np.zeros(network.n_links, dtype=np.int64)
    for e in range(network.n_links):
        low = int(network.min_order[e])
        high = int(min(network.max_order[e], avail[network.src[e]]))
        action[e] = rng.integers(low, high + 1) if high >= low else 0
    return action


def rollout(env: InventoryEnv, policy: Policy, T: int, epsilon: float, rng: np.random.Generator,
            reset_seed: Optional[int] = None) -> Trajectory:
    """
    Play T steps from the env's current state (or a fresh reset).

    With probability epsilon a step takes a random action instead of the
    policy's. Policy actions the sources cannot ship are fulfilled
    proportionally and logged.
    """
    if T < 1:
        raise ContractViolation(f"rollout needs T >= 1, got {T}")
    if not 0.0 <= epsilon <= 1.0:
        raise ContractViolation(f"epsilon must lie in [0, 1], got {epsilon}")
    if reset_seed is not None or env.state is None:
        env.reset(reset_seed)

    traj = Trajectory(seed=env.seed)
    for _ in range(T):
        state = env.state
        explored = bool(rng.random() < epsilon)
        requested = random_action(env.network, state, rng) if explored else np.asarray(policy(state), dtype=np.int64)
        next_state, breakdown, real, rationed = env.step(requested)
        if rationed and not explored:
            logger.warning(f"Policy action {requested.tolist()} exceeds supply at period {state.period}; "
                           f"fulfilled proportionally")
        shipped = apply_proportional_fulfillment(env.network, state, requested) if rationed else requested
        traj.steps.append(Transition(state, shipped, breakdown.total, next_state, explored, rationed,
                                     breakdown, real))
    return traj


def compute_returns(trajectory: Union[Trajectory, Sequence[float]], gamma: float) -> np.ndarray:
    """R_t = r_t + gamma * R_{t+1}, R_{T+1} = 0."""
    rewards = trajectory.rewards() if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    if rewards.size == 0:
        raise ContractViolation("cannot compute returns of an empty trajectory")
    returns = np.empty_like(rewards)
    running = 0.0
    for t in range(rewards.size - 1, -1, -1):
        running = rewards[t] + gamma * running
        returns[t] = running
    return returns
