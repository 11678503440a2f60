"""Tests for the HiGHS maximization wrapper."""

from __future__ import annotations

import numpy as np
import pytest

from bamlab.errors import LpInfeasibleError, LpUnboundedError
from bamlab.lp import LinearProgram, solve_lp


def test_solves_a_small_program() -> None:
    """``max x + y`` under two cuts is attained at their intersection."""
    program = LinearProgram(
        objective=np.array([1.0, 1.0]),
        a_ub=np.array([[1.0, 2.0], [3.0, 1.0]]),
        b_ub=np.array([4.0, 6.0]),
    )
    result = solve_lp(program)
    assert result.objective_value == pytest.approx(2.8), "optimum of x + y"
    np.testing.assert_allclose(result.values, [1.6, 1.2], atol=1e-9)
    assert result.duality_gap <= 1e-8, "HiGHS should certify optimality"


def test_equality_rows_and_free_variables() -> None:
    """Free variables pinned by an equality row are recovered exactly."""
    program = LinearProgram(
        objective=np.array([1.0, 0.0]),
        a_ub=np.array([[1.0, 0.0]]),
        b_ub=np.array([5.0]),
        a_eq=np.array([[1.0, -1.0]]),
        b_eq=np.array([2.0]),
        bounds=[(None, None), (None, None)],
    )
    result = solve_lp(program)
    assert result.objective_value == pytest.approx(5.0), "x is capped at 5"
    assert result.values[1] == pytest.approx(3.0), "y = x − 2"


def test_infeasible_program_raises() -> None:
    """``x ≤ −1`` with ``x ≥ 0`` has no solution."""
    program = LinearProgram(
        objective=np.array([1.0]),
        a_ub=np.array([[1.0]]),
        b_ub=np.array([-1.0]),
    )
    with pytest.raises(LpInfeasibleError):
        solve_lp(program)


def test_unbounded_program_raises() -> None:
    """Maximizing an unconstrained variable never terminates."""
    program = LinearProgram(
        objective=np.array([1.0, 0.0]),
        a_ub=np.array([[0.0, 1.0]]),
        b_ub=np.array([1.0]),
    )
    with pytest.raises(LpUnboundedError):
        solve_lp(program)
