"""Tests for the two-phase simplex solver."""

from __future__ import annotations

import numpy as np
import pytest

from posgi_market.services.lp import LinearProgram, LpStatus, check_feasible, dual_of, solve_lp


def _textbook() -> LinearProgram:
    return LinearProgram(
        c=[3.0, 5.0],
        A=[[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]],
        rhs=[4.0, 12.0, 18.0],
        relations=["<=", "<=", "<="],
    )


class TestOptimal:
    """Programs with a finite optimum."""

    def test_textbook_maximum(self):
        """max 3x + 5y reaches 36 at (2, 6)."""
        verdict = solve_lp(_textbook())
        assert verdict.status is LpStatus.OPTIMAL
        assert np.allclose(verdict.x, [2.0, 6.0])
        assert verdict.objective == pytest.approx(36.0)

    def test_minimization_with_covering_rows(self):
        """Greater-or-equal rows go through phase one."""
        lp = LinearProgram(
            c=[1.0, 1.0],
            A=[[1.0, 2.0], [3.0, 1.0]],
            rhs=[4.0, 6.0],
            relations=[">=", ">="],
            sense="min",
        )
        verdict = solve_lp(lp)
        assert verdict.is_optimal
        assert np.allclose(verdict.x, [1.6, 1.2])
        assert verdict.objective == pytest.approx(2.8)

    def test_equalities(self):
        """Equality rows pin the solution."""
        lp = LinearProgram(c=[1.0, 1.0], A=[[1.0, 1.0], [1.0, -1.0]], rhs=[1.0, 0.0], relations=["=", "="])
        verdict = solve_lp(lp)
        assert np.allclose(verdict.x, [0.5, 0.5])

    def test_redundant_equality(self):
        """A duplicated equality row is dropped after phase one."""
        lp = LinearProgram(c=[1.0, 0.0], A=[[1.0, 1.0], [2.0, 2.0]], rhs=[1.0, 2.0], relations=["=", "="])
        verdict = solve_lp(lp)
        assert verdict.is_optimal
        assert verdict.objective == pytest.approx(1.0)

    def test_lower_bounds(self):
        """Variables may be bounded below by a negative value."""
        lp = LinearProgram(c=[1.0], A=[[1.0]], rhs=[5.0], relations=["<="], lower_bounds=[-2.0], sense="min")
        verdict = solve_lp(lp)
        assert verdict.x[0] == pytest.approx(-2.0)

    def test_degenerate_cycling_example(self):
        """Bland's rule terminates on a program that cycles under Dantzig's rule."""
        lp = LinearProgram(
            c=[-0.75, 20.0, -0.5, 6.0],
            A=[
                [0.25, -8.0, -1.0, 9.0],
                [0.5, -12.0, -0.5, 3.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            rhs=[0.0, 0.0, 1.0],
            relations=["<=", "<=", "<="],
            sense="min",
        )
        verdict = solve_lp(lp)
        assert verdict.is_optimal
        assert verdict.objective == pytest.approx(-1.25)

    def test_deterministic(self):
        """Solving twice gives the same vertex."""
        first = solve_lp(_textbook())
        second = solve_lp(_textbook())
        assert np.array_equal(first.x, second.x)
        assert first.iterations == second.iterations


class TestVerdicts:
    """Infeasible and unbounded programs."""

    def test_infeasible(self):
        """x <= 1 and x >= 2 have no solution."""
        lp = LinearProgram(c=[1.0], A=[[1.0], [1.0]], rhs=[1.0, 2.0], relations=["<=", ">="])
        verdict = solve_lp(lp)
        assert verdict.status is LpStatus.INFEASIBLE
        assert verdict.x is None

    def test_unbounded_with_ray(self):
        """The ray keeps every row satisfied and improves the objective."""
        lp = LinearProgram(c=[1.0, 0.0], A=[[1.0, -1.0]], rhs=[1.0], relations=["<="])
        verdict = solve_lp(lp)
        assert verdict.status is LpStatus.UNBOUNDED
        ray = verdict.ray
        assert np.all(ray >= -1e-12)
        assert np.all(lp.A @ ray <= 1e-12)
        assert lp.c @ ray > 0.0

    def test_malformed_program(self):
        """Dimensions must agree."""
        with pytest.raises(ValueError):
            LinearProgram(c=[1.0, 1.0], A=[[1.0, 1.0]], rhs=[1.0, 2.0], relations=["<="])

    def test_unknown_relation(self):
        """Only <=, = and >= are understood."""
        with pytest.raises(ValueError):
            LinearProgram(c=[1.0], A=[[1.0]], rhs=[1.0], relations=["<"])


class TestDuality:
    """Dual construction and feasibility checks."""

    def test_strong_duality(self):
        """Primal and dual optima coincide."""
        primal = _textbook()
        dual = dual_of(primal)
        assert dual.sense == "min"
        assert solve_lp(dual).objective == pytest.approx(solve_lp(primal).objective)

    def test_check_feasible(self):
        """The optimum is feasible, a violating point is not."""
        lp = _textbook()
        assert check_feasible(lp, [2.0, 6.0])
        assert not check_feasible(lp, [5.0, 0.0])

    def test_dual_needs_a_constraint(self):
        """A program without rows has no dual variables."""
        lp = LinearProgram(c=[1.0, 2.0], A=np.zeros((0, 2)), rhs=[], relations=[], sense="min")
        with pytest.raises(ValueError, match="sans contrainte"):
            dual_of(lp)


class TestScaling:
    """Programs whose coefficients span many orders of magnitude."""

    def test_tiny_rows(self):
        """Rows scaled down to 1e-9 keep the textbook optimum."""
        factors = np.array([1e-7, 1e-9, 1e-4])
        base = _textbook()
        lp = LinearProgram(c=base.c, A=base.A * factors[:, None], rhs=base.rhs * factors, relations=base.relations)
        verdict = solve_lp(lp)
        assert verdict.status is LpStatus.OPTIMAL
        assert np.allclose(verdict.x, [2.0, 6.0])
        assert verdict.objective == pytest.approx(36.0)

    def test_rescaled_columns(self):
        """Changing the unit of a variable rescales its optimal value only."""
        base = _textbook()
        units = np.array([1e-6, 1e3])
        lp = LinearProgram(c=base.c * units, A=base.A * units[None, :], rhs=base.rhs, relations=base.relations)
        verdict = solve_lp(lp)
        assert verdict.status is LpStatus.OPTIMAL
        assert np.allclose(verdict.x * units, [2.0, 6.0])
        assert verdict.objective == pytest.approx(36.0)

    def test_small_incentive_rows_stay_feasible(self):
        """A feasible system with entries near 1e-3 and 1e-8 is not declared infeasible."""
        A = np.array([
            [-2.5e-3, 0.0, 8.3e-8, 0.0],
            [0.0, 1.2e-3, 0.0, -8.3e-8],
            [1.0, 1.0, 1.0, 1.0],
        ])
        lp = LinearProgram(c=[0.0, 0.0, 0.0, 0.0], A=A, rhs=[0.0, 0.0, 1.0], relations=[">=", ">=", "="])
        verdict = solve_lp(lp)
        assert verdict.status is LpStatus.OPTIMAL
        assert check_feasible(lp, verdict.x)


class TestAgainstScipy:
    """Cross-check with an independent solver when available."""

    def test_random_bounded_programs(self):
        """Objectives agree on random feasible bounded programs."""
        optimize = pytest.importorskip("scipy.optimize")
        rng = np.random.default_rng(7)
        for _ in range(25):
            m, n = rng.integers(2, 6), rng.integers(2, 6)
            A = rng.uniform(0.1, 2.0, size=(m, n))
            rhs = rng.uniform(1.0, 10.0, size=m)
            c = rng.uniform(-1.0, 3.0, size=n)
            ours = solve_lp(LinearProgram(c=c, A=A, rhs=rhs, relations=["<="] * m))
            reference = optimize.linprog(-c, A_ub=A, b_ub=rhs, bounds=[(0, None)] * n, method="highs")
            assert ours.is_optimal and reference.status == 0
            assert ours.objective == pytest.approx(-reference.fun, abs=1e-7)
