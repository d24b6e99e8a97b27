from mip.model import Constraint, LinExpr, MilpModel, Variable, append_stats
from mip.encoder import EncodedNetwork, encode_network
from mip.lp_format import export_lp, read_lp, write_lp
from mip.step_problem import (
    StepOptions,
    StepProblem,
    build_step_problem,
    saa_objective,
    saa_objective_batch,
    solution_from_action,
)
