"""
solver/external.py
Hand a step model to an outside MILP solver.

The command template names the LP file with {lp} and the solution file with
{sol}, e.g. "highs --model_file {lp} --solution_file {sol}". The solution
file must hold one "name=value" line per variable; other lines are ignored.
"""
import logging
import math
import re
import shlex
import subprocess
import tempfile
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from env.errors import SolverError
from mip.lp_format import lp_names, write_lp
from mip.model import MilpModel
from solver.branch_and_bound import SolveResult

logger = logging.getLogger(__name__)

_LINE_RE = re.compile(r"^\s*([^=\s]+)\s*=\s*([-+0-9.eEinfINF]+)\s*$")


def parse_solution(text: str) -> Dict[str, float]:
    values = {}
    for line in text.splitlines():
        match = _LINE_RE.match(line)
        if match:
            try:
                values[match.group(1)] = float(match.group(2))
            except ValueError:
                continue
    return values


def solve_external(model: MilpModel, command: str, action_vars: Optional[List[int]] = None,
                   time_limit: Optional[float] = None, workdir: Optional[Path] = None) -> SolveResult:
    if "{lp}" not in command or "{sol}" not in command:
        raise SolverError("external solver command needs {lp} and {sol} placeholders")
    start = time.perf_counter()
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp_path = write_lp(model, Path(tmp) / "step.lp")
        sol_path = Path(tmp) / "step.sol"
        args = [part.format(lp=lp_path, sol=sol_path) for part in shlex.split(command)]
        logger.debug(f"Running external solver: {' '.join(args)}")
        try:
            subprocess.run(args, check=True, capture_output=True, timeout=time_limit)
        except FileNotFoundError:
            raise SolverError(f"external solver '{args[0]}' not found")
        except subprocess.TimeoutExpired:
            raise SolverError(f"external solver exceeded {time_limit}s")
        except subprocess.CalledProcessError as e:
            raise SolverError(f"external solver exited with {e.returncode}: {e.stderr[-500:]!r}")
        if not sol_path.exists():
            raise SolverError("external solver wrote no solution file")
        values = parse_solution(sol_path.read_text())

    names = lp_names(model)
    x = np.array([values.get(name, 0.0) for name in names], dtype=float)
    violation = model.violation(x)
    if violation > 1e-5:
        raise SolverError(f"external solution violates the model by {violation:.3g}")
    objective = model.evaluate(x)
    action = np.rint(x[action_vars]).astype(np.int64) if action_vars is not None else None
    return SolveResult(action, objective, objective, 0.0, "optimal", x, 0, time.perf_counter() - start)
