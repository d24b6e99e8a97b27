"""
solver/branch_and_bound.py
Best-first branch-and-bound with depth-first plunging over solve_lp relaxations.

Branching picks the most fractional binary, then the most fractional general
integer. From every popped node the search plunges into the child with the
better relaxation value and queues the sibling. A node's relaxation value
bounds every integer point below it, so nodes at or under the incumbent are
pruned.
"""
import heapq
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np

from mip.model import MilpModel
from solver.simplex import LinearProgram, LPResult, solve_lp

logger = logging.getLogger(__name__)

DEFAULT_TIME_LIMIT = float(os.environ.get("PARL_SOLVER_TIME_LIMIT", 60))
INT_TOL = 1e-6
PRUNE_TOL = 1e-9

Status = Literal["optimal", "time-limited", "infeasible", "unknown"]


@dataclass
class BnBNode:
    lower: np.ndarray
    upper: np.ndarray
    bound: float
    depth: int
    node_id: int
    parent_id: int = -1
    x: Optional[np.ndarray] = None


@dataclass
class SolveResult:
    action: Optional[np.ndarray]
    objective: float
    bound: float
    gap: float
    status: Status
    x: Optional[np.ndarray] = None
    nodes: int = 0
    elapsed: float = 0.0
    # (node, parent, branch variable, direction, relaxation value)
    trace: List[Tuple[int, int, int, str, float]] = field(default_factory=list)


def _branch_variable(x: np.ndarray, binaries: np.ndarray, integers: np.ndarray) -> Optional[int]:
    frac = np.abs(x - np.round(x))
    for mask in (binaries, integers):
        open_vars = mask & (frac > INT_TOL)
        if open_vars.any():
            # distance to 0.5 ranks fractionality; lowest index wins ties
            score = np.where(open_vars, np.abs((x - np.floor(x)) - 0.5), np.inf)
            return int(np.argmin(score))
    return None


def solve_branch_and_bound(model: MilpModel, time_limit: Optional[float] = None,
                           incumbent: Optional[np.ndarray] = None, action_vars: Optional[List[int]] = None,
                           node_limit: Optional[int] = None) -> SolveResult:
    """
    Maximise model over its integer points.

    incumbent is an optional integer-feasible starting point; action_vars
    are the variables whose rounded values make up SolveResult.action.
    """
    time_limit = DEFAULT_TIME_LIMIT if time_limit is None else time_limit
    start = time.perf_counter()
    lp = LinearProgram.from_model(model)
    binaries = np.array([v.kind == "binary" for v in model.variables], dtype=bool)
    integers = np.array([v.kind == "integer" for v in model.variables], dtype=bool)
    trace: List[Tuple[int, int, int, str, float]] = []

    best_x, best_obj = None, -math.inf
    if incumbent is not None:
        incumbent = np.asarray(incumbent, dtype=float)
        if model.violation(incumbent) <= 1e-6:
            best_x, best_obj = incumbent.copy(), model.evaluate(incumbent)
        else:
            logger.debug("Ignoring starting point that violates the model")

    def finish(status: Status, bound: float, nodes: int) -> SolveResult:
        elapsed = time.perf_counter() - start
        if best_x is None:
            return SolveResult(None, -math.inf, bound, math.inf, "infeasible" if status == "optimal" else status,
                               None, nodes, elapsed, trace)
        gap = max(0.0, bound - best_obj) if status != "optimal" else 0.0
        action = np.rint(best_x[action_vars]).astype(np.int64) if action_vars is not None else None
        if status == "unknown":
            status = "time-limited"
        return SolveResult(action, best_obj, max(bound, best_obj), gap, status, best_x, nodes, elapsed, trace)

    root_lp = solve_lp(lp)
    nodes = 1
    if root_lp.status != "optimal":
        logger.debug(f"Root relaxation {root_lp.status}")
        return finish("optimal" if root_lp.status == "infeasible" else "unknown", -math.inf, nodes)

    root = BnBNode(lp.lower.copy(), lp.upper.copy(), root_lp.objective, 0, 0, -1, root_lp.x)
    trace.append((0, -1, -1, "root", root.bound))
    heap: List[Tuple[float, int, BnBNode]] = [(-root.bound, 0, root)]
    next_id = 1

    def out_of_time() -> bool:
        if node_limit is not None and nodes >= node_limit:
            return True
        return time.perf_counter() - start > time_limit

    def child(node: BnBNode, var: int, direction: str) -> Optional[BnBNode]:
        nonlocal next_id, nodes
        lower, upper = node.lower.copy(), node.upper.copy()
        if direction == "down":
            upper[var] = math.floor(node.x[var])
        else:
            lower[var] = math.ceil(node.x[var])
        result: LPResult = solve_lp(lp, lower, upper)
        nodes += 1
        node_id = next_id
        next_id += 1
        bound = result.objective if result.status == "optimal" else -math.inf
        trace.append((node_id, node.node_id, var, direction, bound))
        if result.status != "optimal":
            return None
        # a child's relaxation can only be tighter
        bound = min(bound, node.bound)
        return BnBNode(lower, upper, bound, node.depth + 1, node_id, node.node_id, result.x)

    while heap:
        if out_of_time():
            open_bound = max(-heap[0][0], best_obj)
            logger.debug(f"Branch-and-bound stopped after {nodes} nodes with bound {open_bound:.6g}")
            return finish("unknown", open_bound, nodes)
        _, _, node = heapq.heappop(heap)
        while node is not None:
            if node.bound <= best_obj + PRUNE_TOL:
                break
            var = _branch_variable(node.x, binaries, integers)
            if var is None:
                x = node.x.copy()
                x[binaries | integers] = np.round(x[binaries | integers])
                value = model.evaluate(x)
                if value > best_obj + PRUNE_TOL:
                    best_x, best_obj = x, value
                    logger.debug(f"New incumbent {value:.6g} at node {node.node_id} (depth {node.depth})")
                break
            if out_of_time():
                heapq.heappush(heap, (-node.bound, node.node_id, node))
                break
            frac = node.x[var] - math.floor(node.x[var])
            first, second = ("up", "down") if frac >= 0.5 else ("down", "up")
            a = child(node, var, first)
            b = child(node, var, second)
            kids = [k for k in (a, b) if k is not None]
            if not kids:
                break
            kids.sort(key=lambda k: -k.bound)
            for other in kids[1:]:
                heapq.heappush(heap, (-other.bound, other.node_id, other))
            node = kids[0]

    return finish("optimal", best_obj, nodes)
