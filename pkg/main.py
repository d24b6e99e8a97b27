"""
main.py
Main entrypoint for the PARL inventory benchmark.
Trains and evaluates PARL, tunes the base stock and DA baselines, compares
sampling schemes and exports per-step MILPs.

Usage:
    python main.py train --config 1s1r-smoke                  # PARL training run
    python main.py train --config 1s3r --preset paper         # full benchmark sizes
    python main.py eval --config 1s3r --method bs --params runs/x/base_stock_seed0.jsonl
    python main.py eval --config 1s1r-smoke --method parl --critic runs/x/checkpoints/critic_005.txt
    python main.py grid-bs --config 1s3r                      # base stock grid search on every link
    python main.py da --config 1s2w3r                         # DA levels
    python main.py compare-sampling --config 1s1r-smoke       # quantile vs random sampling
    python main.py export-lp --config 1s1r-smoke              # write one step MILP as an LP file
    python main.py run experiments/smoke_parl.json            # experiment spec file
"""
import os
import sys
import argparse
from datetime import datetime
import logging

from dotenv import load_dotenv
load_dotenv()

# Set up logging
logging.basicConfig(
    level=os.environ.get("PARL_LOG_LEVEL", "INFO"),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _load(args):
    from bench.presets import apply_preset, get_preset, load_named
    from env.network import Network

    preset = get_preset(args.preset)
    config, text = load_named(args.config)
    return Network(apply_preset(config, preset)), text, preset


def _run_dir(args, default_name):
    import store

    name = f"{default_name}_{datetime.now().strftime('%Y%m%d_%H%M%S')}"
    return store.get_run_dir(name, args.out)


def run_train(args):
    """Train PARL and evaluate the final policy"""
    logger.info("="*80)
    logger.info("TRAINING PARL")
    logger.info("="*80)

    import store
    from bench.evaluation import run_evaluation
    from bench.presets import preset_hyper
    from parl.sampling import SamplingSpec

    network, text, preset = _load(args)
    overrides = {"seed": args.seed, "sampling": SamplingSpec(scheme=args.sampling, eta=args.eta),
                 "warm_start": args.warm_start, "log_trajectories": args.log_trajectories}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    hyper = preset_hyper(preset, **overrides)

    run_dir = _run_dir(args, f"train_{network.config.name}")
    store.save_config_text(run_dir, text)
    store.save_json(run_dir, "hyper", hyper.model_dump(mode="json"))

    from parl.train import parl_train
    result = parl_train(network, hyper, checkpoint=lambda it, net: store.save_checkpoint(run_dir, net, it))
    store.save_frame(run_dir, "learning_curve", result.curve)
    for k, frame in enumerate(result.trajectories):
        store.save_frame(run_dir, f"trajectory_{k}", frame)

    report = run_evaluation(result.policy, network, preset.runs, preset.episodes, preset.steps,
                            base_seed=args.seed, name="parl")
    store.save_frame(run_dir, "eval_report", report.to_frame())
    logger.info(f"Median greedy solve time {result.policy.median_latency:.3f}s")
    logger.info(f"Run directory: {run_dir}")


def run_eval(args):
    """Evaluate a trained or parameterised policy"""
    logger.info("="*80)
    logger.info(f"EVALUATING POLICY ({args.method})")
    logger.info("="*80)

    import store
    from bench.evaluation import FixedPolicy, run_evaluation

    network, _, preset = _load(args)
    if args.method == "parl":
        if not args.critic:
            raise ValueError("--critic is required for --method parl")
        from parl.policy import GreedyPolicy
        from parl.sampling import SamplingSpec
        from valuenet.serialization import load_net
        gamma = args.gamma or network.config.gamma or 0.75
        policy = GreedyPolicy(network, load_net(args.critic), gamma, SamplingSpec(scheme=args.sampling, eta=args.eta),
                              seed=args.seed)
    elif args.method == "bs":
        from heuristics.base_stock import BaseStockPolicy, load_params, tune_base_stock
        params = load_params(args.params) if args.params else tune_base_stock(network, seed=args.seed)[0]
        policy = BaseStockPolicy(params, network)
    elif args.method == "da":
        from heuristics.decomposition import DAPolicy, da_levels
        policy = DAPolicy(da_levels(network), network)
    else:
        if not args.action:
            raise ValueError("--action is required for --method fixed")
        policy = FixedPolicy([int(a) for a in args.action.split(",")])

    report = run_evaluation(policy, network, preset.runs, preset.episodes, preset.steps,
                            base_seed=args.seed, name=args.method)
    run_dir = _run_dir(args, f"eval_{args.method}_{network.config.name}")
    store.save_frame(run_dir, "eval_report", report.to_frame())
    for key, value in report.breakdown().items():
        logger.info(f"  {key}: {value:.3f}")


def run_grid_bs(args):
    """Grid search base stock levels for every link"""
    logger.info("="*80)
    logger.info("BASE STOCK GRID SEARCH")
    logger.info("="*80)

    import store
    from heuristics.base_stock import dump_params, tune_base_stock

    network, _, _ = _load(args)
    params, table = tune_base_stock(network, runs=args.runs, episodes=args.episodes, steps=args.steps,
                                    seed=args.seed)
    run_dir = _run_dir(args, f"grid_bs_{network.config.name}")
    store.save_frame(run_dir, "grid_search", table)
    dump_params(params, run_dir / "base_stock.jsonl")
    for link, (s, S) in params.levels.items():
        logger.info(f"  {link}: s={s}, S={S}")


def run_da(args):
    """Compute decomposition-aggregation levels"""
    logger.info("="*80)
    logger.info("DECOMPOSITION-AGGREGATION LEVELS")
    logger.info("="*80)

    import store
    from heuristics.decomposition import da_levels

    network, _, _ = _load(args)
    levels = da_levels(network)
    run_dir = _run_dir(args, f"da_{network.config.name}")
    store.append_jsonl(run_dir / "da_levels.jsonl", levels.to_records())
    for record in levels.to_records():
        logger.info(f"  {record['kind']} {record['node']}: {record['level']:.3f} -> {record['units']} units")


def run_compare_sampling(args):
    """Train PARL with quantile and with random sampling"""
    logger.info("="*80)
    logger.info("COMPARING QUANTILE AND RANDOM SAMPLING")
    logger.info("="*80)

    import store
    from bench.comparison import compare_sampling
    from bench.evaluation import EvalBudget
    from bench.presets import preset_hyper

    network, _, preset = _load(args)
    overrides = {"seed": args.seed}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    table = compare_sampling(network, preset_hyper(preset, **overrides),
                             EvalBudget(runs=preset.runs, episodes=preset.episodes, steps=preset.steps,
                                        base_seed=args.seed))
    run_dir = _run_dir(args, f"sampling_{network.config.name}")
    store.save_frame(run_dir, "sampling_comparison", table)
    logger.info("\n" + table.to_string(index=False))


def run_export_lp(args):
    """Write the step MILP of a reset state as an LP file"""
    logger.info("="*80)
    logger.info("EXPORTING STEP MILP")
    logger.info("="*80)

    from env.simulator import reset
    from mip.lp_format import write_lp
    from mip.model import append_stats
    from mip.step_problem import build_step_problem
    from parl.sampling import SamplingSpec
    from valuenet.relu_net import init_net
    from valuenet.serialization import load_net

    network, _, _ = _load(args)
    if args.critic:
        net = load_net(args.critic)
    else:
        net = init_net(network.state_dim, seed=args.seed, scale=network.state_scale())
    state = reset(network, seed=args.seed)
    samples = SamplingSpec(scheme="quantile", eta=args.eta).sample_set(network, None)
    gamma = args.gamma or network.config.gamma or 0.75
    problem = build_step_problem(state, samples, net, network, gamma)

    run_dir = _run_dir(args, f"lp_{network.config.name}")
    path = write_lp(problem.model, run_dir / "step.lp")
    append_stats([problem.model], run_dir / "model_stats.jsonl")
    stats = problem.model.stats()
    logger.info(f"Wrote {path}: {stats['variables']} variables ({stats['binaries']} binary), "
                f"{stats['constraints']} constraints")


def run_spec(args):
    """Run an experiment spec file"""
    from bench.experiment import run_experiment

    run_dir = run_experiment(args.spec, args.out)
    logger.info(f"Experiment finished: {run_dir}")


def main():
    parser = argparse.ArgumentParser(
        description="PARL - policy iteration with MILP actions for multi-echelon inventory networks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py train --config 1s1r-smoke              # Train PARL (desk preset)
  python main.py eval --config 1s3r --method da         # Evaluate the DA heuristic
  python main.py grid-bs --config 1sinf1r-backorder     # Tune base stock levels
  python main.py da --config 1s2w3r                     # Print DA levels
  python main.py compare-sampling --config 1s1r-smoke   # Quantile vs random sampling
  python main.py export-lp --config 1s3r                # Dump one step MILP
  python main.py run experiments/smoke_parl.json        # Run an experiment spec
        """
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="1s1r-smoke", help="Config name or path to a config file")
    common.add_argument("--seed", type=int, default=0, help="Base seed")
    common.add_argument("--preset", choices=["desk", "paper"], default="desk", help="Scale preset")
    common.add_argument("--out", default=None, help="Runs directory (default PARL_RUNS_DIR)")
    common.add_argument("--gamma", type=float, default=None, help="Discount factor override")

    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Train command
    train_parser = subparsers.add_parser("train", parents=[common], help="Train PARL")
    train_parser.add_argument("--iterations", type=int, default=None, help="Policy iterations")
    train_parser.add_argument("--sampling", choices=["quantile", "random"], default="quantile")
    train_parser.add_argument("--eta", type=int, default=3, help="Samples per step")
    train_parser.add_argument("--warm-start", action="store_true", help="Refit the critic from the last one")
    train_parser.add_argument("--log-trajectories", action="store_true", help="Write per-step trajectory CSVs")

    # Eval command
    eval_parser = subparsers.add_parser("eval", parents=[common], help="Evaluate a policy")
    eval_parser.add_argument("--method", choices=["parl", "bs", "da", "fixed"], required=True)
    eval_parser.add_argument("--critic", default=None, help="Critic checkpoint (parl)")
    eval_parser.add_argument("--params", default=None, help="Base stock JSON-lines file (bs)")
    eval_parser.add_argument("--action", default=None, help="Comma-separated order vector (fixed)")
    eval_parser.add_argument("--sampling", choices=["quantile", "random"], default="quantile")
    eval_parser.add_argument("--eta", type=int, default=3, help="Samples per step")

    # Grid search command
    grid_parser = subparsers.add_parser("grid-bs", parents=[common], help="Base stock grid search")
    grid_parser.add_argument("--runs", type=int, default=1)
    grid_parser.add_argument("--episodes", type=int, default=8)
    grid_parser.add_argument("--steps", type=int, default=256)

    # DA command
    subparsers.add_parser("da", parents=[common], help="Decomposition-aggregation levels")

    # Sampling comparison command
    compare_parser = subparsers.add_parser("compare-sampling", parents=[common], help="Quantile vs random sampling")
    compare_parser.add_argument("--iterations", type=int, default=None, help="Policy iterations")

    # LP export command
    lp_parser = subparsers.add_parser("export-lp", parents=[common], help="Export one step MILP")
    lp_parser.add_argument("--critic", default=None, help="Critic checkpoint (random critic otherwise)")
    lp_parser.add_argument("--eta", type=int, default=3, help="Samples per step")

    # Experiment command
    run_parser = subparsers.add_parser("run", help="Run an experiment spec file")
    run_parser.add_argument("spec", help="Path to the JSON spec")
    run_parser.add_argument("--out", default=None, help="Runs directory (default PARL_RUNS_DIR)")

    args = parser.parse_args()

    logger.info(f"PARL benchmark - Started at {datetime.now().isoformat()}")

    if not args.command:
        parser.print_help()
        return

    try:
        if args.command == "train":
            run_train(args)
        elif args.command == "eval":
            run_eval(args)
        elif args.command == "grid-bs":
            run_grid_bs(args)
        elif args.command == "da":
            run_da(args)
        elif args.command == "compare-sampling":
            run_compare_sampling(args)
        elif args.command == "export-lp":
            run_export_lp(args)
        elif args.command == "run":
            run_spec(args)
        else:
            parser.print_help()
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        sys.exit(0)
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
