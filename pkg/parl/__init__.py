from parl.sampling import (
    SampleSet,
    SamplingSpec,
    quantile_levels,
    quantile_samples,
    random_samples,
    top_k_products,
    uncertain_dimensions,
)
from parl.rollout import Trajectory, Transition, compute_returns, random_action, rollout
from parl.policy import GreedyPolicy, RandomPolicy, greedy_action, greedy_decision
from parl.train import ParlHyper, ParlResult, parl_train
