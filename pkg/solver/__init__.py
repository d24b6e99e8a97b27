from solver.simplex import LinearProgram, LPResult, solve_lp
from solver.branch_and_bound import BnBNode, SolveResult, solve_branch_and_bound
from solver.enumeration import feasible_actions, solve_enumeration
from solver.external import parse_solution, solve_external
