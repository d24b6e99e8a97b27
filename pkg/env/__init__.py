from env.errors import (
    BoundsError,
    ConfigError,
    ContractViolation,
    ExperimentError,
    FitError,
    HeuristicError,
    ModelError,
    NetworkShapeError,
    ParlError,
    SamplingError,
    SolverError,
)
from env.distributions import Const, Distribution, Normal, Uniform, discretize, parse_distribution
from env.network import LinkSpec, Network, NetworkConfig, NodeSpec
from env.config_parser import load_config, parse_config
from env.simulator import (
    Action,
    EpisodeResult,
    InventoryEnv,
    PipelineState,
    Realization,
    RewardBreakdown,
    apply_proportional_fulfillment,
    episode_seeds,
    inventory_position,
    reset,
    sample_uncertainty,
    simulate_episode,
    state_vector,
    step,
)
