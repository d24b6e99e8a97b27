"""
parl/train.py
Policy iteration with a ReLU critic and a MILP-greedy actor.

Every iteration plays N rollouts of T steps with the previous policy (random
in the first iteration), fits the critic to the discounted returns of all
visited states and turns it into the next greedy policy. Policies are lazy:
an action is only solved for when a rollout reaches that state.
"""
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

from env.network import Network, NetworkConfig
from env.simulator import InventoryEnv, as_network, state_vector
from mip.step_problem import StepOptions
from parl.policy import GreedyPolicy, RandomPolicy, SolverChoice
from parl.rollout import Trajectory, compute_returns, rollout
from parl.sampling import SamplingSpec
from valuenet.relu_net import FitDataset, FitHyper, ReLUNet, fit, init_net

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_PARALLELISM = int(os.environ.get("PARL_PARALLELISM", 8))

CURVE_COLUMNS = [
    "iteration", "env_steps", "mean_reward", "median_reward", "std_reward",
    "explored_fraction", "solve_time_per_step", "fit_loss", "elapsed",
]


class ParlHyper(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(0.75, gt=0, lt=1)
    epsilon: float = Field(0.1, ge=0, le=1)
    steps: int = Field(256, ge=1)
    paths: int = Field(8, ge=1)
    iterations: int = Field(10, ge=1)
    hidden: Tuple[int, ...] = (16, 16)
    fit: FitHyper = FitHyper()
    sampling: SamplingSpec = SamplingSpec()
    solver: SolverChoice = "auto"
    time_limit: Optional[float] = Field(None, gt=0)
    dynamics: Literal["exact", "relaxed"] = "exact"
    warm_start: bool = False
    parallelism: int = Field(DEFAULT_PARALLELISM, ge=1)
    seed: int = 0
    log_trajectories: bool = False

    def discount(self, config: Union[Network, NetworkConfig]) -> float:
        """Explicit gamma wins; otherwise the network's hint, then the default."""
        if "gamma" in self.model_fields_set:
            return self.gamma
        hint = as_network(config).config.gamma
        return hint if hint is not None else self.gamma


@dataclass
class ParlResult:
    net: ReLUNet
    policy: GreedyPolicy
    curve: pd.DataFrame
    gamma: float
    # critic values are shifted by this constant; argmax is unaffected
    value_offset: float = 0.0
    trajectories: List[pd.DataFrame] = field(default_factory=list)


def _seed(base: int, *keys: int) -> int:
    return int(np.random.SeedSequence([base, *keys]).generate_state(1)[0])


def _play(network: Network, policy, hyper: ParlHyper, iteration: int, path: int):
    env = InventoryEnv(network, seed=_seed(hyper.seed, iteration, path, 0), log_trajectory=hyper.log_trajectories)
    worker = policy.spawn(_seed(hyper.seed, iteration, path, 1))
    rng = np.random.default_rng(_seed(hyper.seed, iteration, path, 2))
    epsilon = 1.0 if isinstance(worker, RandomPolicy) else hyper.epsilon
    traj = rollout(env, worker, hyper.steps, epsilon, rng, reset_seed=env.seed)
    return traj, list(worker.solve_times), env.trajectory_frame() if hyper.log_trajectories else None


def _fit_critic(network: Network, states: np.ndarray, targets: np.ndarray, hyper: ParlHyper,
                iteration: int, previous: Optional[ReLUNet]) -> Tuple[ReLUNet, float, float]:
    """Fit on standardized targets; the output layer is rescaled afterwards."""
    offset = float(targets.mean())
    spread = float(targets.std()) or 1.0
    if hyper.warm_start and previous is not None:
        start = previous.copy()
        start.c = start.c / spread
    else:
        start = init_net(network.state_dim, hyper.hidden, seed=_seed(hyper.seed, iteration, 99),
                         scale=network.state_scale())
    fit_hyper = hyper.fit.model_copy(update={"seed": _seed(hyper.fit.seed, iteration)})
    net, trace = fit(start, FitDataset(states, (targets - offset) / spread), fit_hyper)
    net.c = net.c * spread
    loss = trace[-1] * spread ** 2 if trace else float("nan")
    return net, offset, loss


def parl_train(config: Union[Network, NetworkConfig], hyper: Optional[ParlHyper] = None,
               checkpoint: Optional[Callable[[int, ReLUNet], None]] = None) -> ParlResult:
    hyper = hyper or ParlHyper()
    network = as_network(config)
    gamma = hyper.discount(network)
    options = StepOptions(dynamics=hyper.dynamics)

    logger.info("=" * 80)
    logger.info(f"PARL TRAINING ON '{network.config.name}'")
    logger.info("=" * 80)
    logger.info(f"gamma={gamma}, eta={hyper.sampling.eta} ({hyper.sampling.scheme}), epsilon={hyper.epsilon}, "
                f"{hyper.iterations} iterations x {hyper.paths} paths x {hyper.steps} steps")

    policy: Union[RandomPolicy, GreedyPolicy] = RandomPolicy(network, seed=hyper.seed)
    net: Optional[ReLUNet] = None
    offset = 0.0
    rows, logs = [], []
    env_steps = 0
    started = time.perf_counter()

    for iteration in range(1, hyper.iterations + 1):
        logger.info(f"Iteration {iteration}/{hyper.iterations}: {hyper.paths} rollouts")
        with ThreadPoolExecutor(max_workers=min(hyper.parallelism, hyper.paths)) as pool:
            futures = [pool.submit(_play, network, policy, hyper, iteration, path) for path in range(hyper.paths)]
            played = [f.result() for f in futures]

        trajectories: List[Trajectory] = [p[0] for p in played]
        solve_times = [t for p in played for t in p[1]]
        if hyper.log_trajectories:
            for path, p in enumerate(played):
                frame = p[2].assign(iteration=iteration, path=path)
                logs.append(frame)

        states = np.concatenate([
            np.stack([state_vector(network, t.state) for t in traj.steps]) for traj in trajectories
        ])
        targets = np.concatenate([compute_returns(traj, gamma) for traj in trajectories])
        env_steps += sum(len(traj) for traj in trajectories)

        net, offset, loss = _fit_critic(network, states, targets, hyper, iteration, net)
        if checkpoint is not None:
            checkpoint(iteration, net)

        per_path = np.array([traj.rewards().mean() for traj in trajectories])
        explored = float(np.mean(np.concatenate([traj.explored() for traj in trajectories])))
        rows.append({
            "iteration": iteration,
            "env_steps": env_steps,
            "mean_reward": float(per_path.mean()),
            "median_reward": float(np.median(per_path)),
            "std_reward": float(per_path.std()),
            "explored_fraction": explored,
            "solve_time_per_step": float(np.mean(solve_times)) if solve_times else 0.0,
            "fit_loss": loss,
            "elapsed": time.perf_counter() - started,
        })
        logger.info(f"Iteration {iteration}: mean per-step reward {rows[-1]['mean_reward']:.3f} "
                    f"(std {rows[-1]['std_reward']:.3f}), critic MSE {loss:.4g}")

        policy = GreedyPolicy(network, net, gamma, hyper.sampling, hyper.solver, hyper.time_limit, options,
                              seed=_seed(hyper.seed, iteration, 7))

    curve = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    return ParlResult(net, policy, curve, gamma, offset, logs)
