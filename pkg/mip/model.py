"""
mip/model.py
Plain container for a linear mixed-integer program (always maximized).

Variables carry a kind and a box; constraints are sparse rows with a sense
and a right-hand side. The solvers read the dense form from to_arrays().
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np

from env.errors import ModelError

logger = logging.getLogger(__name__)

VarKind = Literal["continuous", "integer", "binary"]
Sense = Literal["<=", ">=", "="]


class LinExpr:
    """Sparse affine expression over variable indices."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Optional[Dict[int, float]] = None, constant: float = 0.0):
        self.terms: Dict[int, float] = dict(terms or {})
        self.constant = float(constant)

    def add(self, var: int, coef: float = 1.0) -> "LinExpr":
        if coef != 0.0:
            self.terms[var] = self.terms.get(var, 0.0) + float(coef)
        return self

    def add_expr(self, other: "LinExpr", factor: float = 1.0) -> "LinExpr":
        for var, coef in other.terms.items():
            self.add(var, factor * coef)
        self.constant += factor * other.constant
        return self

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def value(self, x: np.ndarray) -> float:
        return self.constant + sum(coef * float(x[var]) for var, coef in self.terms.items())

    def __repr__(self):
        return f"LinExpr({self.terms}, {self.constant})"


@dataclass
class Variable:
    name: str
    kind: VarKind
    lower: float
    upper: float


@dataclass
class Constraint:
    name: str
    coeffs: Dict[int, float]
    sense: Sense
    rhs: float


@dataclass
class MilpModel:
    name: str = "model"
    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0

    def __post_init__(self):
        self._by_name: Dict[str, int] = {v.name: i for i, v in enumerate(self.variables)}
        self._row_names = {c.name for c in self.constraints}

    # -- construction --------------------------------------------------

    def add_var(self, name: str, kind: VarKind = "continuous", lower: float = 0.0,
                upper: float = math.inf) -> int:
        if name in self._by_name:
            raise ModelError(f"variable name collision: {name}")
        if kind == "binary":
            lower, upper = max(0.0, lower), min(1.0, upper)
        if lower > upper:
            raise ModelError(f"variable {name} has empty domain [{lower}, {upper}]")
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        self._by_name[name] = len(self.variables) - 1
        return len(self.variables) - 1

    def add_constraint(self, expr: Union[LinExpr, Dict[int, float]], sense: Sense, rhs: float = 0.0,
                       name: Optional[str] = None) -> int:
        """Add expr (sense) rhs; a constant inside expr is moved to the right-hand side."""
        if isinstance(expr, LinExpr):
            coeffs, rhs = dict(expr.terms), rhs - expr.constant
        else:
            coeffs = dict(expr)
        if sense not in ("<=", ">=", "="):
            raise ModelError(f"unknown constraint sense {sense}")
        for var in coeffs:
            if not 0 <= var < len(self.variables):
                raise ModelError(f"constraint references undeclared variable {var}")
        name = name or f"c{len(self.constraints)}"
        if name in self._row_names:
            raise ModelError(f"constraint name collision: {name}")
        self._row_names.add(name)
        self.constraints.append(Constraint(name, {v: c for v, c in coeffs.items() if c != 0.0}, sense, float(rhs)))
        return len(self.constraints) - 1

    def add_objective(self, expr: Union[LinExpr, Dict[int, float]], factor: float = 1.0) -> None:
        terms = expr.terms if isinstance(expr, LinExpr) else expr
        for var, coef in terms.items():
            if not 0 <= var < len(self.variables):
                raise ModelError(f"objective references undeclared variable {var}")
            self.objective[var] = self.objective.get(var, 0.0) + factor * coef
        if isinstance(expr, LinExpr):
            self.objective_constant += factor * expr.constant

    def fix(self, var: int, value: float) -> None:
        self.variables[var].lower = float(value)
        self.variables[var].upper = float(value)

    # -- queries -------------------------------------------------------

    def var(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise ModelError(f"undeclared variable {name}")

    def find(self, name: str) -> Optional[int]:
        return self._by_name.get(name)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def count(self, kind: VarKind) -> int:
        return sum(1 for v in self.variables if v.kind == kind)

    def integer_mask(self) -> np.ndarray:
        return np.array([v.kind != "continuous" for v in self.variables], dtype=bool)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        return lower, upper

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for var, coef in self.objective.items():
            c[var] += coef
        return c

    def to_arrays(self):
        """(c, A, senses, b) with A dense, one row per constraint."""
        A = np.zeros((self.n_constraints, self.n_vars))
        b = np.zeros(self.n_constraints)
        senses = []
        for r, con in enumerate(self.constraints):
            for var, coef in con.coeffs.items():
                A[r, var] += coef
            b[r] = con.rhs
            senses.append(con.sense)
        return self.objective_vector(), A, senses, b

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self.objective_constant + float(self.objective_vector() @ x)

    def violation(self, x, check_integrality: bool = True) -> float:
        """Largest violation of bounds, rows and (optionally) integrality at x."""
        x = np.asarray(x, dtype=float)
        lower, upper = self.bounds()
        worst = float(max(np.max(lower - x, initial=0.0), np.max(x - upper, initial=0.0)))
        for con in self.constraints:
            lhs = sum(coef * x[var] for var, coef in con.coeffs.items())
            if con.sense == "<=":
                worst = max(worst, lhs - con.rhs)
            elif con.sense == ">=":
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        if check_integrality:
            mask = self.integer_mask()
            if mask.any():
                worst = max(worst, float(np.max(np.abs(x[mask] - np.round(x[mask])))))
        return worst

    def relaxed(self) -> "MilpModel":
        """Copy with every integrality requirement dropped."""
        relaxed = MilpModel(
            name=f"{self.name}_relaxed",
            variables=[Variable(v.name, "continuous", v.lower, v.upper) for v in self.variables],
            constraints=[Constraint(c.name, dict(c.coeffs), c.sense, c.rhs) for c in self.constraints],
            objective=dict(self.objective),
            objective_constant=self.objective_constant,
        )
        return relaxed

    # -- statistics ----------------------------------------------------

    def stats(self) -> Dict[str, Union[str, int]]:
        return {
            "model": self.name,
            "variables": self.n_vars,
            "constraints": self.n_constraints,
            "binaries": self.count("binary"),
            "integers": self.count("integer"),
            "continuous": self.count("continuous"),
            "nonzeros": sum(len(c.coeffs) for c in self.constraints),
        }


def append_stats(models: Iterable[MilpModel], path: Union[str, Path]) -> Path:
    """Append one JSON line of statistics per model."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as f:
        for model in models:
            f.write(json.dumps(model.stats()) + "\n")
    return path
