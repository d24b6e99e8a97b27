from bench.presets import (
    BENCHMARK_CONFIGS,
    NAMED_CONFIGS,
    PRESETS,
    Preset,
    apply_preset,
    get_preset,
    load_named,
    preset_hyper,
)
from bench.evaluation import EvalBudget, EvalReport, FixedPolicy, run_evaluation
from bench.experiment import ExperimentSpec, load_experiment, run_experiment
from bench.comparison import compare_sampling
from bench.structure import OrderUpToFit, fit_order_up_to, visited_orders
