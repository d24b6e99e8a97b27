"""
bench/comparison.py
Quantile versus random sampling: train PARL once per scheme on paired seeds
and report per-step reward and per-step training time.
"""
import logging
import time
from typing import Optional, Union

import pandas as pd

from bench.evaluation import EvalBudget, run_evaluation
from env.network import Network, NetworkConfig
from env.simulator import as_network
from parl.sampling import SamplingSpec
from parl.train import ParlHyper, parl_train

logger = logging.getLogger(__name__)


def compare_sampling(config: Union[Network, NetworkConfig], hyper: Optional[ParlHyper] = None,
                     budget: Optional[EvalBudget] = None) -> pd.DataFrame:
    network = as_network(config)
    hyper = hyper or ParlHyper()
    budget = budget or EvalBudget(runs=3, episodes=2, steps=64)
    rows = []
    for scheme in ("quantile", "random"):
        sampling = SamplingSpec(scheme=scheme, eta=hyper.sampling.eta, weights=hyper.sampling.weights)
        started = time.perf_counter()
        result = parl_train(network, hyper.model_copy(update={"sampling": sampling}))
        elapsed = time.perf_counter() - started
        env_steps = int(result.curve["env_steps"].iloc[-1])
        report = run_evaluation(result.policy, network, budget.runs, budget.episodes, budget.steps,
                                base_seed=budget.base_seed, name=f"parl_{scheme}")
        rows.append({
            "scheme": scheme,
            "per_step_reward": report.mean,
            "train_time_per_step": elapsed / env_steps,
        })
        logger.info(f"{scheme} sampling: {report.mean:.3f} per step, {elapsed / env_steps:.4f}s train time per step")
    return pd.DataFrame(rows, columns=["scheme", "per_step_reward", "train_time_per_step"])
