"""
bench/evaluation.py
Multi-run policy evaluation with paired seeds.

A run is `episodes` episodes of `steps` periods; its score is the mean
per-step reward. Every policy evaluated with the same base seed sees the same
initial states and demand traces.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from env.network import Network, NetworkConfig
from env.simulator import PipelineState, as_network, episode_seeds, simulate_episode

logger = logging.getLogger(__name__)

PARALLELISM = int(os.environ.get("PARL_PARALLELISM", 8))

RUN_COLUMNS = ["policy", "run", "status", "mean_reward", "revenue", "ordering_cost", "holding_cost",
               "backorder_cost"]
STAT_COLUMNS = ["mean_reward", "revenue", "ordering_cost", "holding_cost", "backorder_cost"]


class EvalBudget(BaseModel):
    model_config = ConfigDict(frozen=True)

    runs: int = Field(10, ge=1)
    episodes: int = Field(20, ge=1)
    steps: int = Field(256, ge=1)
    base_seed: int = 0


@dataclass
class EvalReport:
    policy: str
    # one row per run; breakdown columns are per-step averages
    runs: pd.DataFrame
    demands: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def completed(self) -> pd.DataFrame:
        return self.runs[self.runs["status"] == "ok"]

    @property
    def mean(self) -> float:
        return float(self.completed["mean_reward"].mean())

    @property
    def median(self) -> float:
        return float(self.completed["mean_reward"].median())

    @property
    def std(self) -> float:
        return float(np.std(self.completed["mean_reward"].to_numpy()))

    def breakdown(self) -> Dict[str, float]:
        return {col: float(self.completed[col].mean()) for col in STAT_COLUMNS}

    def to_frame(self) -> pd.DataFrame:
        """Per-run rows followed by mean, median and std rows over completed runs."""
        ok = self.completed[STAT_COLUMNS]
        aggregates = []
        for stat, values in (("mean", ok.mean()), ("median", ok.median()), ("std", ok.std(ddof=0))):
            row = {"policy": self.policy, "run": stat, "status": "aggregate"}
            row.update({col: float(values[col]) for col in STAT_COLUMNS})
            aggregates.append(row)
        runs = self.runs.assign(run=self.runs["run"].astype(str))
        return pd.concat([runs, pd.DataFrame(aggregates, columns=RUN_COLUMNS)], ignore_index=True)


def _run(network: Network, policy, run: int, seeds: List[int], steps: int, keep_demands: bool):
    worker = policy.spawn(seeds[0]) if hasattr(policy, "spawn") else policy
    totals = np.zeros(5)
    demands = []
    for seed in seeds:
        episode = simulate_episode(network, worker, seed, steps)
        totals += [episode.mean_reward, episode.revenue / steps, episode.ordering_cost / steps,
                   episode.holding_cost / steps, episode.backorder_cost / steps]
        if keep_demands:
            demands.append(episode.demands)
    totals /= len(seeds)
    return totals, (np.concatenate(demands) if keep_demands else None)


def run_evaluation(policy: Callable[[PipelineState], np.ndarray], config: Union[Network, NetworkConfig],
                   runs: int = 10, episodes: int = 20, steps: int = 256, base_seed: int = 0,
                   name: str = "policy", keep_demands: bool = False,
                   parallelism: Optional[int] = None) -> EvalReport:
    network = as_network(config)
    seeds = episode_seeds(base_seed, runs, episodes)
    logger.info(f"Evaluating '{name}' on '{network.config.name}': {runs} runs x {episodes} episodes x {steps} steps")

    def attempt(run: int):
        try:
            return _run(network, policy, run, seeds[run], steps, keep_demands), None
        except Exception as e:
            return None, e

    with ThreadPoolExecutor(max_workers=parallelism or PARALLELISM) as pool:
        outcomes = list(pool.map(attempt, range(runs)))

    rows, demands = [], {}
    for run, (result, error) in enumerate(outcomes):
        if error is not None:
            logger.warning(f"Run {run} of '{name}' failed and is excluded: {error}")
            rows.append({"policy": name, "run": run, "status": "failed", **{c: np.nan for c in STAT_COLUMNS}})
            continue
        totals, trace = result
        rows.append({"policy": name, "run": run, "status": "ok", **dict(zip(STAT_COLUMNS, map(float, totals)))})
        if trace is not None:
            demands[run] = trace

    report = EvalReport(name, pd.DataFrame(rows, columns=RUN_COLUMNS), demands)
    if report.completed.empty:
        logger.warning(f"Every run of '{name}' failed")
    else:
        logger.info(f"'{name}': mean {report.mean:.3f}, median {report.median:.3f}, std {report.std:.3f}")
    return report


class FixedPolicy:
    """The same order vector in every state."""

    def __init__(self, action):
        self.action = np.asarray(action, dtype=np.int64)

    def __call__(self, state: PipelineState) -> np.ndarray:
        return self.action.copy()
