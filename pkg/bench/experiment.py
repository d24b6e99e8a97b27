"""
bench/experiment.py
Run one experiment spec file end to end and leave its artifacts in a run directory.

Spec files are JSON:

    {
      "name": "smoke-parl",
      "config": "1s1r-smoke",
      "method": "parl",
      "preset": "desk",
      "seeds": [0],
      "hyper": {"iterations": 3},
      "evaluation": {"runs": 2, "episodes": 2, "steps": 32}
    }

Usage:
    python -m bench.experiment experiments/smoke_parl.json
"""
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from bench.evaluation import EvalBudget, EvalReport, FixedPolicy, run_evaluation
from bench.presets import apply_preset, get_preset, load_named, preset_hyper
from bench.structure import fit_order_up_to, visited_orders
from env.errors import ExperimentError
from env.network import Network
from heuristics.base_stock import BaseStockPolicy, dump_params, tune_base_stock
from heuristics.decomposition import DAPolicy, da_levels
from parl.train import ParlHyper, parl_train
import store

logger = logging.getLogger(__name__)

Method = Literal["parl", "bs", "da", "fixed"]


class GridBudget(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    runs: int = Field(1, ge=1)
    episodes: int = Field(4, ge=1)
    steps: int = Field(128, ge=1)


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    config: str
    method: Method
    preset: Literal["desk", "paper"] = "desk"
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    hyper: Dict[str, Any] = Field(default_factory=dict)
    evaluation: Optional[EvalBudget] = None
    grid: GridBudget = GridBudget()
    fixed_action: Optional[List[int]] = None
    keep_demands: bool = True


def load_experiment(path: Union[str, Path]) -> ExperimentSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ExperimentError(f"cannot read experiment spec {path}: {e}")
    if isinstance(doc, dict) and doc.get("method") not in (None, "parl", "bs", "da", "fixed"):
        raise ExperimentError(f"unknown method '{doc['method']}'; expected parl, bs, da or fixed")
    try:
        spec = ExperimentSpec.model_validate(doc)
        ParlHyper(**spec.hyper)
    except ValidationError as e:
        first = e.errors()[0]
        raise ExperimentError(f"malformed experiment spec {path}: {first['msg']} at "
                              f"{'.'.join(str(p) for p in first['loc'])}")
    return spec


def _policy_for(spec: ExperimentSpec, network: Network, seed: int, run_dir: Path) -> Tuple[Any, Dict[str, str]]:
    """Build (or train) the policy and write its parameters; returns (policy, artifact paths)."""
    artifacts = {}
    if spec.method == "parl":
        hyper = preset_hyper(get_preset(spec.preset), **{**spec.hyper, "seed": seed})
        result = parl_train(network, hyper, checkpoint=lambda it, net: store.save_checkpoint(run_dir, net, it))
        artifacts["learning_curve"] = str(store.save_frame(run_dir, f"learning_curve_seed{seed}", result.curve))
        for k, frame in enumerate(result.trajectories):
            store.save_frame(run_dir, f"trajectory_seed{seed}_{k}", frame)
        if network.n_links == 1:
            visited = visited_orders(network, result.policy, seeds=[seed], steps=hyper.steps)
            fitted = fit_order_up_to(visited["inventory_position"], visited["order"],
                                     cap=float(network.max_order[0]))
            artifacts["structure"] = str(store.save_json(run_dir, f"order_up_to_seed{seed}", fitted.to_dict()))
        return result.policy, artifacts
    if spec.method == "bs":
        params, table = tune_base_stock(network, seed=seed, **spec.grid.model_dump())
        artifacts["grid"] = str(store.save_frame(run_dir, f"grid_search_seed{seed}", table))
        artifacts["params"] = str(dump_params(params, run_dir / f"base_stock_seed{seed}.jsonl"))
        return BaseStockPolicy(params, network), artifacts
    if spec.method == "da":
        levels = da_levels(network)
        path = run_dir / "da_levels.jsonl"
        if path.exists():
            path.unlink()
        artifacts["params"] = str(store.append_jsonl(path, levels.to_records()))
        return DAPolicy(levels, network), artifacts
    if spec.fixed_action is None or len(spec.fixed_action) != network.n_links:
        raise ExperimentError(f"method 'fixed' needs fixed_action with {network.n_links} entries")
    return FixedPolicy(spec.fixed_action), artifacts


def run_experiment(spec: Union[str, Path, ExperimentSpec], out: Optional[Union[str, Path]] = None) -> Path:
    if not isinstance(spec, ExperimentSpec):
        spec = load_experiment(spec)
    preset = get_preset(spec.preset)
    config, text = load_named(spec.config)
    network = Network(apply_preset(config, preset))
    run_dir = store.get_run_dir(spec.name, out)
    store.save_config_text(run_dir, text)
    store.save_json(run_dir, "experiment", spec.model_dump(mode="json"))

    logger.info("=" * 80)
    logger.info(f"EXPERIMENT {spec.name}: {spec.method} on {network.config.name} ({spec.preset} preset)")
    logger.info("=" * 80)

    budget = spec.evaluation or EvalBudget(runs=preset.runs, episodes=preset.episodes, steps=preset.steps)
    reports: List[EvalReport] = []
    for seed in spec.seeds:
        policy, _ = _policy_for(spec, network, seed, run_dir)
        report = run_evaluation(policy, network, budget.runs, budget.episodes, budget.steps,
                                base_seed=budget.base_seed, name=f"{spec.method}_seed{seed}",
                                keep_demands=spec.keep_demands)
        reports.append(report)
        if spec.keep_demands and report.demands:
            traces = pd.concat([
                pd.DataFrame(trace, columns=network.node_ids).assign(run=run, step=range(len(trace)))
                for run, trace in report.demands.items()
            ], ignore_index=True)
            store.save_frame(run_dir, f"demands_{spec.method}_seed{seed}", traces)

    store.save_frame(run_dir, "eval_report", pd.concat([r.to_frame() for r in reports], ignore_index=True))
    logger.info(f"Artifacts written to {run_dir}")
    return run_dir


if __name__ == "__main__":
    logging.basicConfig(
        level=os.environ.get("PARL_LOG_LEVEL", "INFO"),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    if len(sys.argv) != 2:
        print("usage: python -m bench.experiment <spec.json>")
        sys.exit(2)
    try:
        run_experiment(sys.argv[1])
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        sys.exit(0)
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        sys.exit(1)
