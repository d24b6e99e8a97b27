"""
solver/simplex.py
Dense bounded-variable primal simplex for max c.x s.t. rows, l <= x <= u.

Rows become equalities with one slack each (>= rows are negated first).
Phase 1 drives artificials to zero, phase 2 optimises c. Entering columns
use Dantzig pricing until too many degenerate pivots in a row, then Bland's
smallest-index rule for the rest of the solve.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from env.errors import SolverError
from mip.model import MilpModel

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
FEAS_TOL = 1e-7
BLAND_AFTER = 50
REFRESH_EVERY = 100


@dataclass
class LinearProgram:
    """Dense arrays of a model, reused across many bound changes."""
    c: np.ndarray
    A: np.ndarray
    senses: List[str]
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float = 0.0

    @classmethod
    def from_model(cls, model: MilpModel) -> "LinearProgram":
        c, A, senses, b = model.to_arrays()
        lower, upper = model.bounds()
        return cls(c, A, senses, b, lower, upper, model.objective_constant)


@dataclass
class LPResult:
    status: str
    objective: float
    x: Optional[np.ndarray]
    pivots: int
    reduced_costs: Optional[np.ndarray] = None


class _BoundedSimplex:
    def __init__(self, lp: LinearProgram, lower: np.ndarray, upper: np.ndarray, max_pivots: Optional[int]):
        A = lp.A.astype(float).copy()
        b = lp.b.astype(float).copy()
        m, n = A.shape
        equal = np.zeros(m, dtype=bool)
        for r, sense in enumerate(lp.senses):
            if sense == ">=":
                A[r] *= -1.0
                b[r] *= -1.0
            elif sense == "=":
                equal[r] = True

        self.m, self.n = m, n
        self.b = b
        self.max_pivots = max_pivots if max_pivots is not None else 50 * (m + n) + 1000
        self.pivots = 0
        self.degenerate = 0
        self.bland = False

        if np.any(np.isinf(lower) & np.isinf(upper)):
            raise SolverError("free variables are not supported; give every variable a finite bound")

        x = np.zeros(n + 2 * m)
        x[:n] = np.where(np.isfinite(lower), lower, upper)
        residual = b - A @ x[:n]

        sigma = np.ones(m)
        needs_art = equal | (residual < 0)
        sigma[needs_art & (residual < 0)] = -1.0

        self.lo = np.concatenate([lower, np.zeros(m), np.zeros(m)]).astype(float)
        self.hi = np.concatenate([upper, np.where(equal, 0.0, np.inf), np.where(needs_art, np.inf, 0.0)]).astype(float)

        self.basis = np.where(needs_art, n + m + np.arange(m), n + np.arange(m))
        x[n:n + m] = np.where(needs_art, 0.0, residual)
        x[n + m:] = np.where(needs_art, np.abs(residual), 0.0)
        self.x = x

        T = np.zeros((m, n + 2 * m))
        T[:, :n] = A
        T[:, n:n + m] = np.eye(m)
        T[:, n + m:] = np.diag(sigma)
        # basis matrix is diag(1 or sigma); divide artificial rows by sigma
        T[needs_art] /= sigma[needs_art, np.newaxis]
        self.T = T
        self.is_basic = np.zeros(n + 2 * m, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(n + 2 * m, dtype=bool)
        self.at_upper[:n] = ~np.isfinite(lower)
        self.needs_art = needs_art

    def refresh(self) -> None:
        """Recompute basic values from the nonbasic ones to wash out drift."""
        n, m = self.n, self.m
        binv = self.T[:, n:n + m]
        nonbasic = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = binv @ self.b - self.T @ nonbasic

    def run(self, cost: np.ndarray) -> str:
        d = cost - cost[self.basis] @ self.T
        movable = (self.hi - self.lo) > PIVOT_TOL
        while True:
            improving = ~self.is_basic & movable & (
                ((~self.at_upper) & (d > OPT_TOL)) | (self.at_upper & (d < -OPT_TOL))
            )
            candidates = np.flatnonzero(improving)
            if candidates.size == 0:
                self.d = d
                return "optimal"
            if self.bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmax(np.abs(d[candidates]))])

            direction = -1.0 if self.at_upper[j] else 1.0
            alpha = self.T[:, j]
            delta = -direction * alpha
            xb = self.x[self.basis]
            lo_b, hi_b = self.lo[self.basis], self.hi[self.basis]

            ratios = np.full(self.m, np.inf)
            dec = delta < -PIVOT_TOL
            inc = delta > PIVOT_TOL
            ratios[dec] = (xb[dec] - lo_b[dec]) / -delta[dec]
            ratios[inc] = (hi_b[inc] - xb[inc]) / delta[inc]
            ratios = np.maximum(ratios, 0.0)
            theta_row = float(ratios.min()) if self.m else np.inf
            theta_flip = self.hi[j] - self.lo[j]

            if theta_flip <= theta_row:
                if np.isinf(theta_flip):
                    return "unbounded"
                self.x[self.basis] = xb + delta * theta_flip
                self.at_upper[j] = not self.at_upper[j]
                self.x[j] = self.hi[j] if self.at_upper[j] else self.lo[j]
                self._count(theta_flip)
                continue
            if np.isinf(theta_row):
                return "unbounded"

            ties = np.flatnonzero(ratios <= theta_row + PIVOT_TOL)
            if self.bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])

            leaving = int(self.basis[r])
            self.x[self.basis] = xb + delta * theta_row
            self.x[j] += direction * theta_row
            leave_upper = delta[r] > 0
            self.x[leaving] = self.hi[leaving] if leave_upper else self.lo[leaving]
            self.at_upper[leaving] = leave_upper

            pivot_row = self.T[r] / self.T[r, j]
            column = self.T[:, j].copy()
            column[r] = 0.0
            self.T -= np.outer(column, pivot_row)
            self.T[r] = pivot_row
            d = d - d[j] * pivot_row

            self.basis[r] = j
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.at_upper[j] = False
            self._count(theta_row)
            if self.pivots % REFRESH_EVERY == 0:
                self.refresh()

    def _count(self, theta: float) -> None:
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise SolverError(f"simplex stalled after {self.pivots} pivots")
        if theta <= PIVOT_TOL:
            self.degenerate += 1
            if self.degenerate >= BLAND_AFTER and not self.bland:
                logger.debug(f"Switching to Bland's rule after {self.degenerate} degenerate pivots")
                self.bland = True
        else:
            self.degenerate = 0


def solve_lp(problem, lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None,
             max_pivots: Optional[int] = None) -> LPResult:
    """
    Solve the continuous relaxation of a MilpModel (or a prepared LinearProgram).

    lower/upper override the variable bounds, which is how branch-and-bound
    explores nodes without rebuilding the arrays.
    """
    lp = problem if isinstance(problem, LinearProgram) else LinearProgram.from_model(problem)
    lower = lp.lower if lower is None else np.asarray(lower, dtype=float)
    upper = lp.upper if upper is None else np.asarray(upper, dtype=float)
    n = lp.c.shape[0]
    if np.any(lower > upper + FEAS_TOL):
        return LPResult("infeasible", -np.inf, None, 0)

    simplex = _BoundedSimplex(lp, lower, np.maximum(upper, lower), max_pivots)
    m = simplex.m

    if simplex.needs_art.any():
        phase1 = np.zeros(n + 2 * m)
        phase1[n + m:] = -1.0
        simplex.run(phase1)
        simplex.refresh()
        infeasibility = float(simplex.x[n + m:].sum())
        scale = max(1.0, float(np.max(np.abs(simplex.b), initial=0.0)))
        if infeasibility > FEAS_TOL * scale:
            return LPResult("infeasible", -np.inf, None, simplex.pivots)
        simplex.hi[n + m:] = 0.0
        art_basic = simplex.is_basic.copy()
        art_basic[:n + m] = False
        simplex.x[n + m:] = np.where(art_basic[n + m:], simplex.x[n + m:], 0.0)

    phase2 = np.concatenate([lp.c, np.zeros(2 * m)])
    status = simplex.run(phase2)
    simplex.refresh()
    if status == "unbounded":
        return LPResult("unbounded", np.inf, None, simplex.pivots)

    x = np.clip(simplex.x[:n], lower, np.maximum(upper, lower))
    objective = float(lp.c @ x) + lp.constant
    return LPResult("optimal", objective, x, simplex.pivots, simplex.d[:n].copy())
