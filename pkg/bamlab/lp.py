"""Maximization wrapper over the HiGHS backend of :func:`scipy.optimize.linprog`."""

from __future__ import annotations

import dataclasses as dc
import logging
import typing as typ

import numpy as np
from scipy import optimize

from bamlab.errors import LpInfeasibleError, LpSolverError, LpUnboundedError

if typ.TYPE_CHECKING:
    from scipy import sparse

logger = logging.getLogger(__name__)

LP_TOL = 1e-10
_STATUS_INFEASIBLE = 2
_STATUS_UNBOUNDED = 3


@dc.dataclass(frozen=True, eq=False)
class LinearProgram:
    """``max c·x`` subject to ``A_ub x ≤ b_ub``, ``A_eq x = b_eq`` and bounds.

    ``bounds`` follows :func:`scipy.optimize.linprog`: one ``(low, high)``
    pair for every variable, ``None`` meaning unbounded on that side.
    """

    objective: np.ndarray
    a_ub: np.ndarray | sparse.sparray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | sparse.sparray | None = None
    b_eq: np.ndarray | None = None
    bounds: list[tuple[float | None, float | None]] | None = None


@dc.dataclass(frozen=True, eq=False)
class LpResult:
    """Optimal point, optimal value and the primal-dual gap reported by HiGHS."""

    values: np.ndarray
    objective_value: float
    duality_gap: float


def _dual_objective(program: LinearProgram, res: optimize.OptimizeResult) -> float:
    """Minimization dual value ``Σ b·λ`` over rows and finite bounds."""
    total = 0.0
    if program.b_ub is not None:
        total += float(np.asarray(program.b_ub) @ res.ineqlin.marginals)
    if program.b_eq is not None:
        total += float(np.asarray(program.b_eq) @ res.eqlin.marginals)
    n = len(program.objective)
    bounds = program.bounds or [(0.0, None)] * n
    lows = np.array([np.nan if lo is None else lo for lo, _ in bounds], dtype=float)
    highs = np.array([np.nan if hi is None else hi for _, hi in bounds], dtype=float)
    sides = ((lows, res.lower.marginals), (highs, res.upper.marginals))
    for limits, marginals in sides:
        finite = np.isfinite(limits)
        total += float(limits[finite] @ marginals[finite])
    return total


def solve_lp(program: LinearProgram) -> LpResult:
    """Solve ``program`` and return an optimal basic solution."""
    objective = np.asarray(program.objective, dtype=float)
    res = optimize.linprog(
        -objective,
        A_ub=program.a_ub,
        b_ub=program.b_ub,
        A_eq=program.a_eq,
        b_eq=program.b_eq,
        bounds=program.bounds if program.bounds is not None else (0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": LP_TOL,
            "dual_feasibility_tolerance": LP_TOL,
        },
    )
    if res.status == _STATUS_INFEASIBLE:
        msg = f"Linear program is infeasible: {res.message}"
        raise LpInfeasibleError(msg)
    if res.status == _STATUS_UNBOUNDED:
        msg = f"Linear program is unbounded: {res.message}"
        raise LpUnboundedError(msg)
    if res.status != 0:
        msg = f"LP backend stopped with status {res.status}: {res.message}"
        raise LpSolverError(msg)
    value = -float(res.fun)
    gap = abs(float(res.fun) - _dual_objective(program, res))
    logger.debug(
        "LP with %d variables solved: value %.10g, duality gap %.3g",
        objective.shape[0],
        value,
        gap,
    )
    return LpResult(np.asarray(res.x, dtype=float), value, gap)


__all__ = ["LP_TOL", "LinearProgram", "LpResult", "solve_lp"]
