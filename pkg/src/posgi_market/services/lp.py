"""Dense two-phase simplex solver with Bland's anti-cycling rule.

Programs are small (a few dozen columns for the stage games) and highly
degenerate, so the tableau is kept dense and Bland's rule is always on: the
entering column is the lowest-index column with a negative reduced cost and
ratio ties leave through the lowest-index basic variable.

Stage-game payoffs can sit around 1e-3 with meaningful entries near 1e-8, so
every program is equilibrated (power-of-two row, column and objective
factors) before the tableau is built and all thresholds are relative to the
scaled rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
ZERO_TOL = 1e-13
_SCALING_PASSES = 4

Relation = Literal["<=", "=", ">="]
Sense = Literal["max", "min"]
_RELATIONS = ("<=", "=", ">=")


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(slots=True)
class LinearProgram:
    """``sense c.x`` subject to ``A x (relation) rhs`` and ``x >= lower_bounds``."""

    c: np.ndarray
    A: np.ndarray
    rhs: np.ndarray
    relations: List[str]
    lower_bounds: Optional[np.ndarray] = None
    sense: Sense = "max"

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        if n == 0:
            raise ValueError("Le programme doit avoir au moins une variable")
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.relations = list(self.relations)

        if self.A.shape[0] != self.rhs.size or self.rhs.size != len(self.relations):
            raise ValueError(
                f"Dimensions incohérentes: A {self.A.shape}, rhs {self.rhs.size}, "
                f"relations {len(self.relations)}"
            )
        for relation in self.relations:
            if relation not in _RELATIONS:
                raise ValueError(f"Relation inconnue: {relation!r}")
        if self.sense not in ("max", "min"):
            raise ValueError(f"Sens d'optimisation inconnu: {self.sense!r}")

        if self.lower_bounds is None:
            self.lower_bounds = np.zeros(n)
        else:
            self.lower_bounds = np.asarray(self.lower_bounds, dtype=float).reshape(-1)
            if self.lower_bounds.size != n:
                raise ValueError("Une borne inférieure par variable est requise")

        for name, values in (("c", self.c), ("A", self.A), ("rhs", self.rhs), ("bornes", self.lower_bounds)):
            if not np.all(np.isfinite(values)):
                raise ValueError(f"Coefficients non finis dans {name}")

    @property
    def n_variables(self) -> int:
        return int(self.c.size)

    @property
    def n_constraints(self) -> int:
        return int(self.rhs.size)


@dataclass(slots=True)
class LpVerdict:
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    ray: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass(slots=True)
class _Tableau:
    """Constraint rows plus the reduced-cost row (last), rhs in the last column."""

    table: np.ndarray
    basis: List[int]
    n_structural: int
    artificial: List[int] = field(default_factory=list)
    iterations: int = 0


# Scaling ------------------------------------------------------------------


def _power_of_two(values: np.ndarray) -> np.ndarray:
    """Nearest powers of two of the positive entries, 1 elsewhere."""

    factors = np.ones_like(values)
    positive = values > 0.0
    factors[positive] = np.exp2(np.round(np.log2(values[positive])))
    return factors


def _equilibrate(lp: LinearProgram) -> Tuple[LinearProgram, np.ndarray]:
    """Scaled copy of ``lp`` and the column factors mapping it back.

    Rows and columns are alternately divided by the power of two closest to
    their largest magnitude, so the scaled program has entries of order one
    and ``x = cols * x_scaled``. Powers of two keep the scaling exact.
    """

    A = lp.A.copy()
    rhs = lp.rhs.copy()
    cols = np.ones(lp.n_variables)
    if lp.n_constraints:
        # Entries this far below the largest coefficient are round-off.
        A[np.abs(A) <= ZERO_TOL * np.abs(A).max(initial=0.0)] = 0.0
        for _ in range(_SCALING_PASSES):
            rows = _power_of_two(np.abs(A).max(axis=1))
            A /= rows[:, None]
            rhs /= rows
            col_norms = _power_of_two(np.abs(A).max(axis=0))
            A /= col_norms[None, :]
            cols /= col_norms

    c = lp.c * cols
    c = c / _power_of_two(np.array([np.abs(c).max()]))[0]
    scaled = LinearProgram(
        c=c,
        A=A,
        rhs=rhs,
        relations=lp.relations,
        lower_bounds=lp.lower_bounds / cols,
        sense=lp.sense,
    )
    return scaled, cols


# Standard form ------------------------------------------------------------


def _standard_form(lp: LinearProgram) -> Tuple[_Tableau, np.ndarray]:
    """Shift bounds to zero, orient rows and add slack/artificial columns."""

    n = lp.n_variables
    m = lp.n_constraints
    A = lp.A.copy()
    rhs = lp.rhs - A @ lp.lower_bounds if m else lp.rhs.copy()
    relations = list(lp.relations)

    for i in range(m):
        # Rows are oriented so that a slack can start basic whenever possible.
        flip = rhs[i] < 0.0 or (rhs[i] == 0.0 and relations[i] == ">=")
        if flip:
            A[i] *= -1.0
            rhs[i] *= -1.0
            relations[i] = {"<=": ">=", ">=": "<=", "=": "="}[relations[i]]

    n_slack = sum(1 for r in relations if r != "=")
    n_artificial = sum(1 for r in relations if r != "<=")
    width = n + n_slack + n_artificial

    table = np.zeros((m + 1, width + 1))
    table[:m, :n] = A
    table[:m, -1] = rhs

    basis: List[int] = []
    artificial: List[int] = []
    slack_col = n
    art_col = n + n_slack
    for i, relation in enumerate(relations):
        if relation == "<=":
            table[i, slack_col] = 1.0
            basis.append(slack_col)
            slack_col += 1
        elif relation == ">=":
            table[i, slack_col] = -1.0
            slack_col += 1
            table[i, art_col] = 1.0
            basis.append(art_col)
            artificial.append(art_col)
            art_col += 1
        else:
            table[i, art_col] = 1.0
            basis.append(art_col)
            artificial.append(art_col)
            art_col += 1

    costs = -lp.c if lp.sense == "max" else lp.c.copy()
    return _Tableau(table=table, basis=basis, n_structural=n, artificial=artificial), costs


def _set_objective(tab: _Tableau, costs: np.ndarray) -> None:
    """Write the reduced costs of ``min costs.x`` for the current basis."""

    width = tab.table.shape[1] - 1
    row = np.zeros(width + 1)
    row[: costs.size] = costs
    for i, var in enumerate(tab.basis):
        if row[var] != 0.0:
            row -= row[var] * tab.table[i]
    row[np.abs(row) < ZERO_TOL] = 0.0
    tab.table[-1] = row


def _pivot(tab: _Tableau, row: int, col: int) -> None:
    table = tab.table
    table[row] /= table[row, col]
    for k in range(table.shape[0]):
        if k != row and table[k, col] != 0.0:
            table[k] -= table[k, col] * table[row]
    # Round-off below ZERO_TOL would otherwise show up as tiny pivots.
    table[np.abs(table) < ZERO_TOL] = 0.0
    table[row, col] = 1.0
    rhs = table[:-1, -1]
    rhs[(rhs < 0.0) & (rhs > -FEAS_TOL)] = 0.0
    tab.basis[row] = col
    tab.iterations += 1


def _pivot_floor(table: np.ndarray, row: int) -> float:
    """Smallest acceptable pivot magnitude in ``row``."""

    return PIVOT_TOL * max(1.0, float(np.abs(table[row, :-1]).max()))


def _iteration_cap(tab: _Tableau) -> int:
    rows, cols = tab.table.shape
    return max(10_000, 50 * rows * cols)


def _run_simplex(tab: _Tableau, allowed: np.ndarray) -> Optional[int]:
    """Pivot to optimality; return the entering column of an unbounded ray."""

    cap = _iteration_cap(tab)
    while True:
        table = tab.table
        m = table.shape[0] - 1
        if tab.iterations > cap:
            raise RuntimeError(f"Simplexe: plafond de {cap} itérations dépassé")

        reduced = table[-1, :-1]
        candidates = np.flatnonzero(allowed & (reduced < -FEAS_TOL))
        if candidates.size == 0:
            return None
        col = int(candidates[0])

        best_row: Optional[int] = None
        best_ratio = np.inf
        for i in range(m):
            coef = table[i, col]
            if coef <= _pivot_floor(table, i):
                continue
            ratio = table[i, -1] / coef
            if best_row is None or ratio < best_ratio - PIVOT_TOL:
                best_row, best_ratio = i, ratio
            elif abs(ratio - best_ratio) <= PIVOT_TOL and tab.basis[i] < tab.basis[best_row]:
                best_row, best_ratio = i, ratio
        if best_row is None:
            return col
        _pivot(tab, best_row, col)


def _drive_out_artificials(tab: _Tableau) -> None:
    """Pivot zero-valued artificials out of the basis, dropping redundant rows."""

    artificial = set(tab.artificial)
    width = tab.table.shape[1] - 1
    real_cols = [j for j in range(width) if j not in artificial]
    row = 0
    while row < len(tab.basis):
        if tab.basis[row] not in artificial:
            row += 1
            continue
        floor = _pivot_floor(tab.table, row)
        entering = next((j for j in real_cols if abs(tab.table[row, j]) > floor), None)
        if entering is None:
            logger.debug("Contrainte redondante supprimée (ligne %s)", row)
            tab.table = np.delete(tab.table, row, axis=0)
            del tab.basis[row]
            continue
        _pivot(tab, row, entering)
        row += 1


def _primal_values(tab: _Tableau) -> np.ndarray:
    values = np.zeros(tab.table.shape[1] - 1)
    for i, var in enumerate(tab.basis):
        values[var] = tab.table[i, -1]
    return values


# Public API ----------------------------------------------------------------


def solve_lp(lp: LinearProgram) -> LpVerdict:
    """Solve ``lp`` and return an optimal, infeasible or unbounded verdict.

    Deterministic given its input. Unbounded verdicts carry a ray ``d >= 0``
    along which every constraint keeps holding and the objective improves.
    """

    scaled, cols = _equilibrate(lp)
    tab, costs = _standard_form(scaled)
    width = tab.table.shape[1] - 1
    n = lp.n_variables

    if tab.artificial:
        phase_one = np.zeros(width)
        phase_one[tab.artificial] = 1.0
        _set_objective(tab, phase_one)
        _run_simplex(tab, np.ones(width, dtype=bool))
        infeasibility = -tab.table[-1, -1]
        scale = max(1.0, float(np.abs(scaled.rhs).max(initial=0.0)))
        if infeasibility > FEAS_TOL * scale:
            logger.debug("Programme infaisable (phase 1: %.3e)", infeasibility)
            return LpVerdict(status=LpStatus.INFEASIBLE, iterations=tab.iterations)
        _drive_out_artificials(tab)

    allowed = np.ones(width, dtype=bool)
    allowed[tab.artificial] = False
    _set_objective(tab, costs)
    ray_col = _run_simplex(tab, allowed)

    if ray_col is not None:
        direction = np.zeros(width)
        direction[ray_col] = 1.0
        for i, var in enumerate(tab.basis):
            direction[var] = -tab.table[i, ray_col]
        return LpVerdict(status=LpStatus.UNBOUNDED, ray=cols * direction[:n], iterations=tab.iterations)

    x = cols * (_primal_values(tab)[:n] + scaled.lower_bounds)
    return LpVerdict(
        status=LpStatus.OPTIMAL,
        x=x,
        objective=float(lp.c @ x),
        iterations=tab.iterations,
    )


def check_feasible(lp: LinearProgram, x: Sequence[float] | np.ndarray, tol: float = FEAS_TOL) -> bool:
    """Whether ``x`` satisfies every row and bound of ``lp`` within ``tol``."""

    point = np.asarray(x, dtype=float).reshape(-1)
    if point.size != lp.n_variables:
        raise ValueError(f"Dimension du point {point.size} != {lp.n_variables} variables")

    if np.any(point < lp.lower_bounds - tol):
        return False
    lhs = lp.A @ point if lp.n_constraints else np.zeros(0)
    for value, bound, relation in zip(lhs, lp.rhs, lp.relations):
        if relation == "<=" and value > bound + tol:
            return False
        if relation == ">=" and value < bound - tol:
            return False
        if relation == "=" and abs(value - bound) > tol:
            return False
    return True


def dual_of(lp: LinearProgram) -> LinearProgram:
    """Symmetric dual of a program whose variables are bounded below by zero.

    ``max c.x, Ax <= b`` becomes ``min b.y, A^T y >= c, y >= 0``; other rows
    are first rewritten into that orientation (equalities as two rows). A
    program without constraints has a dual without variables, which a
    ``LinearProgram`` cannot hold, so it is refused.
    """

    if np.any(lp.lower_bounds != 0.0):
        raise ValueError("Le dual symétrique suppose des bornes inférieures nulles")
    if lp.n_constraints == 0:
        raise ValueError("Programme sans contrainte: son dual n'a aucune variable")

    wanted = "<=" if lp.sense == "max" else ">="
    rows: List[np.ndarray] = []
    bounds: List[float] = []
    for row, bound, relation in zip(lp.A, lp.rhs, lp.relations):
        if relation in (wanted, "="):
            rows.append(row)
            bounds.append(bound)
        if relation != wanted:
            rows.append(-row)
            bounds.append(-bound)

    A = np.asarray(rows, dtype=float).reshape(-1, lp.n_variables)
    dual_relation = ">=" if lp.sense == "max" else "<="
    return LinearProgram(
        c=np.asarray(bounds, dtype=float),
        A=A.T,
        rhs=lp.c,
        relations=[dual_relation] * lp.n_variables,
        sense="min" if lp.sense == "max" else "max",
    )


__all__ = [
    "FEAS_TOL",
    "LinearProgram",
    "LpStatus",
    "LpVerdict",
    "PIVOT_TOL",
    "ZERO_TOL",
    "check_feasible",
    "dual_of",
    "solve_lp",
]
