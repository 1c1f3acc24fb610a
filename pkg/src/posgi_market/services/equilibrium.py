"""Stage games and correlated equilibria.

A correlated equilibrium (CE) of a normal-form game is a distribution ``p``
over joint profiles such that no player gains by deviating from the action it
is recommended. With ``U`` the incentive matrix (one row per player,
recommended action and deviation; one column per profile) the CE polytope is
``{p >= 0, sum(p) = 1, U p >= 0}``, solved here with the in-house simplex.

Profiles are always enumerated lexicographically over the players' action
lists, the last player varying fastest; LP variables follow that order, so
ties between optimal vertices resolve deterministically through Bland's rule.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import EquilibriumNotFoundError
from ..models.domain import MarketState
from ..models.game import GameDocument
from .lmsr import joint_trade_payments
from .lp import FEAS_TOL, LinearProgram, LpStatus, solve_lp
from .posgi import ACTION_ORDER
from .risk import NegativeMode, crra

logger = logging.getLogger(__name__)

CeObjective = Literal["utilitarian", "uniform"]
_STAGE_ACTION_LABELS = tuple(action.label for action in ACTION_ORDER)


@dataclass(slots=True)
class NormalFormGame:
    """``utilities[a_1, ..., a_n, i]`` is player i's payoff at that profile."""

    actions: Tuple[Tuple[str, ...], ...]
    utilities: np.ndarray
    players: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.actions = tuple(tuple(names) for names in self.actions)
        self.utilities = np.asarray(self.utilities, dtype=float)
        n = len(self.actions)
        if n < 1:
            raise ValueError("Un jeu a au moins un joueur")
        expected = tuple(len(names) for names in self.actions) + (n,)
        if self.utilities.shape != expected:
            raise ValueError(f"Tenseur d'utilités {self.utilities.shape}, attendu {expected}")
        if not np.all(np.isfinite(self.utilities)):
            raise ValueError("Utilités non finies")
        if not self.players:
            self.players = tuple(f"joueur_{i + 1}" for i in range(n))
        elif len(self.players) != n:
            raise ValueError("Un nom par joueur est requis")

    @property
    def n_players(self) -> int:
        return len(self.actions)

    @property
    def counts(self) -> Tuple[int, ...]:
        return tuple(len(names) for names in self.actions)

    @property
    def n_profiles(self) -> int:
        return int(np.prod(self.counts))

    @property
    def profiles(self) -> List[Tuple[int, ...]]:
        return list(itertools.product(*(range(c) for c in self.counts)))

    @property
    def flat_utilities(self) -> np.ndarray:
        """``(n_profiles, n_players)`` view in profile order."""

        return self.utilities.reshape(self.n_profiles, self.n_players)

    def profile_label(self, profile: Tuple[int, ...]) -> Tuple[str, ...]:
        return tuple(self.actions[i][a] for i, a in enumerate(profile))

    @classmethod
    def from_document(cls, document: GameDocument) -> "NormalFormGame":
        counts = tuple(len(names) for names in document.actions)
        utilities = np.asarray(document.utilities, dtype=float).reshape(counts + (len(document.players),))
        return cls(
            actions=tuple(tuple(names) for names in document.actions),
            utilities=utilities,
            players=tuple(document.players),
        )

    def to_document(self) -> GameDocument:
        return GameDocument(
            players=list(self.players),
            actions=[list(names) for names in self.actions],
            utilities=self.flat_utilities.tolist(),
        )


@dataclass(slots=True)
class CorrelatedEquilibrium:
    probs: np.ndarray
    method: str = "utilitarian"

    def expected_utilities(self, game: NormalFormGame) -> np.ndarray:
        return self.probs @ game.flat_utilities

    def support(self, tol: float = FEAS_TOL) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.probs > tol)]


@dataclass(slots=True)
class ParetoProfileSet:
    """Non-dominated pure profiles with their weighted welfare."""

    members: Tuple[int, ...]
    welfare: np.ndarray
    weights: np.ndarray
    best: int


@dataclass(slots=True)
class CeCalcReport:
    """Per-period output of ``ce_calc``."""

    distributions: List[CorrelatedEquilibrium] = field(default_factory=list)
    dual_iterations: List[int] = field(default_factory=list)
    assembly_rows: List[int] = field(default_factory=list)
    fallbacks: int = 0


# Stage game ----------------------------------------------------------------


def build_stage_game(
    state: MarketState,
    b: float,
    beliefs: Sequence[float],
    thetas: Sequence[float],
    *,
    traded_security: int = 0,
    negative_mode: NegativeMode = "principal",
) -> NormalFormGame:
    """One-period game over (sell, hold, buy) for every agent.

    An agent's monetary reward is ``a_i * p_i - payment_i``: the expected
    value of the unit it trades minus its order-symmetrized LMSR payment
    (negative for a sale). Rewards then go through each agent's CRRA utility.
    """

    n = len(beliefs)
    if n < 1 or len(thetas) != n:
        raise ValueError("Une croyance et un theta par agent sont requis")
    for estimate in beliefs:
        if not 0.0 < estimate < 1.0:
            raise ValueError(f"Croyance hors de ]0, 1[: {estimate}")

    utilities = np.zeros((len(ACTION_ORDER),) * n + (n,))
    for profile in itertools.product(range(len(ACTION_ORDER)), repeat=n):
        orders = [int(ACTION_ORDER[k]) for k in profile]
        payments = joint_trade_payments(state.q, traded_security, orders, b)
        for i in range(n):
            reward = orders[i] * beliefs[i] - payments[i]
            utilities[profile + (i,)] = crra(reward, thetas[i], negative_mode)

    return NormalFormGame(actions=(_STAGE_ACTION_LABELS,) * n, utilities=utilities)


# CE linear programs --------------------------------------------------------


def incentive_matrix(game: NormalFormGame) -> Tuple[np.ndarray, List[Tuple[int, int, int]]]:
    """Rows ``(player, recommended, deviation)`` of ``u_i(phi) - u_i(dev, phi_-i)``."""

    profiles = game.profiles
    rows: List[np.ndarray] = []
    labels: List[Tuple[int, int, int]] = []
    for i in range(game.n_players):
        payoff = game.utilities[..., i]
        for recommended in range(game.counts[i]):
            for deviation in range(game.counts[i]):
                if deviation == recommended:
                    continue
                row = np.zeros(len(profiles))
                for col, profile in enumerate(profiles):
                    if profile[i] != recommended:
                        continue
                    deviated = profile[:i] + (deviation,) + profile[i + 1:]
                    row[col] = payoff[profile] - payoff[deviated]
                rows.append(row)
                labels.append((i, recommended, deviation))
    U = np.asarray(rows, dtype=float).reshape(len(rows), len(profiles))
    return U, labels


def ce_constraints(game: NormalFormGame) -> LinearProgram:
    """Incentive rows ``U p >= 0`` followed by ``sum(p) = 1`` (zero objective)."""

    U, _ = incentive_matrix(game)
    P = game.n_profiles
    A = np.vstack([U, np.ones((1, P))])
    relations = [">="] * U.shape[0] + ["="]
    rhs = np.concatenate([np.zeros(U.shape[0]), [1.0]])
    return LinearProgram(c=np.zeros(P), A=A, rhs=rhs, relations=relations, sense="max")


def _normalized(x: np.ndarray) -> np.ndarray:
    probs = np.clip(x, 0.0, None)
    return probs / probs.sum()


def solve_ce(game: NormalFormGame, objective: CeObjective = "utilitarian") -> CorrelatedEquilibrium:
    """Welfare-maximizing (or any feasible) correlated equilibrium."""

    if objective not in ("utilitarian", "uniform"):
        raise ValueError(f"Objectif inconnu: {objective!r}")
    lp = ce_constraints(game)
    if objective == "utilitarian":
        lp.c = game.flat_utilities.sum(axis=1)
    verdict = solve_lp(lp)
    if verdict.status is not LpStatus.OPTIMAL:
        pure = _pure_equilibrium(game)
        if pure is not None:
            logger.warning(
                "Programme des équilibres corrélés %s, repli sur le profil pur %s",
                verdict.status.value,
                int(np.argmax(pure.probs)),
            )
            return pure
        logger.error("Aucun équilibre corrélé trouvé (statut %s)", verdict.status.value)
        raise EquilibriumNotFoundError(
            f"Le programme des équilibres corrélés est {verdict.status.value}"
        )
    return CorrelatedEquilibrium(probs=_normalized(verdict.x), method=objective)


def _pure_equilibrium(game: NormalFormGame) -> Optional[CorrelatedEquilibrium]:
    """Highest-welfare pure profile whose point mass is already a CE."""

    U, _ = incentive_matrix(game)
    tol = FEAS_TOL * max(1.0, float(np.abs(U).max(initial=0.0)))
    stable = [k for k in range(game.n_profiles) if np.all(U[:, k] >= -tol)]
    if not stable:
        return None
    welfare = game.flat_utilities.sum(axis=1)
    best = max(stable, key=lambda k: (welfare[k], -k))
    probs = np.zeros(game.n_profiles)
    probs[best] = 1.0
    return CorrelatedEquilibrium(probs=probs, method="pure")


def dual_feasibility_test(game: NormalFormGame) -> bool:
    """True iff ``U^T y <= -1, y >= 0`` is infeasible, i.e. a CE exists."""

    U, _ = incentive_matrix(game)
    if U.shape[0] == 0:
        return True
    lp = LinearProgram(
        c=np.zeros(U.shape[0]),
        A=U.T,
        rhs=-np.ones(U.shape[1]),
        relations=["<="] * U.shape[1],
    )
    return solve_lp(lp).status is LpStatus.INFEASIBLE


def get_dual_distribution(
    U: np.ndarray,
    epsilon: float = 1e-3,
    max_iterations: int = 10_000,
    initial: Optional[np.ndarray] = None,
) -> Tuple[List[np.ndarray], int, bool]:
    """Walk ``y_{l+1} = y_l + epsilon`` while ``U^T y_l <= -1`` holds.

    Returns the visited duals (the first failing point included), the number
    of steps taken and whether the iteration cap stopped the walk.
    """

    if epsilon <= 0.0:
        raise ValueError(f"epsilon doit être > 0: {epsilon}")
    y = np.zeros(U.shape[0]) if initial is None else np.asarray(initial, dtype=float).copy()
    if y.size != U.shape[0]:
        raise ValueError("Le point dual initial doit avoir une entrée par ligne de U")

    visited: List[np.ndarray] = []
    steps = 0
    while True:
        visited.append(y.copy())
        if not np.all(U.T @ y <= -1.0):
            return visited, steps, False
        if steps >= max_iterations:
            return visited, steps, True
        y = y + epsilon
        steps += 1


def is_ce(game: NormalFormGame, p: Sequence[float] | np.ndarray, tol: float = FEAS_TOL) -> bool:
    probs = np.asarray(p, dtype=float).reshape(-1)
    if probs.size != game.n_profiles:
        raise ValueError(f"Distribution de taille {probs.size}, {game.n_profiles} profils attendus")
    if np.any(probs < -tol) or abs(probs.sum() - 1.0) > tol:
        return False
    U, _ = incentive_matrix(game)
    return bool(np.all(U @ probs >= -tol))


def incentive_slacks(game: NormalFormGame, p: Sequence[float] | np.ndarray) -> List[Tuple[int, int, int, float]]:
    """``(player, recommended, deviation, slack)`` for every incentive row."""

    U, labels = incentive_matrix(game)
    values = U @ np.asarray(p, dtype=float)
    return [(i, rec, dev, float(v)) for (i, rec, dev), v in zip(labels, values)]


def ce_calc(
    horizon: int,
    game_supplier: Callable[[int], NormalFormGame],
    *,
    epsilon: float = 1e-3,
    max_iterations: int = 10_000,
) -> CeCalcReport:
    """Per-period CE through the dual walk, falling back to ``solve_ce``.

    Each period assembles ``U``, collects dual points with
    ``get_dual_distribution`` and solves the CE program with the extra
    equalities ``p . (U^T y) = 0`` for every collected ``y``.
    """

    if horizon < 1:
        raise ValueError(f"L'horizon doit être >= 1: {horizon}")

    report = CeCalcReport()
    for period in range(horizon):
        game = game_supplier(period)
        U, _ = incentive_matrix(game)
        bound = game.n_players * max(game.counts) ** 2
        if U.shape[0] > bound:
            raise EquilibriumNotFoundError(
                f"Période {period}: {U.shape[0]} lignes d'incitation pour une borne de {bound}"
            )
        report.assembly_rows.append(U.shape[0])

        duals, steps, capped = get_dual_distribution(U, epsilon, max_iterations)
        report.dual_iterations.append(steps)
        if capped:
            logger.warning("Période %s: plafond de %s itérations duales atteint, repli sur solve_ce", period, steps)
            report.fallbacks += 1
            report.distributions.append(solve_ce(game))
            continue

        lp = ce_constraints(game)
        extra = [U.T @ y for y in duals]
        extra = [row for row in extra if np.any(row != 0.0)]
        if extra:
            lp = LinearProgram(
                c=lp.c,
                A=np.vstack([lp.A, np.asarray(extra)]),
                rhs=np.concatenate([lp.rhs, np.zeros(len(extra))]),
                relations=lp.relations + ["="] * len(extra),
            )
        lp.c = game.flat_utilities.sum(axis=1)
        verdict = solve_lp(lp)
        if verdict.status is LpStatus.OPTIMAL and is_ce(game, _normalized(verdict.x)):
            report.distributions.append(CorrelatedEquilibrium(probs=_normalized(verdict.x), method="algorithm"))
        else:
            logger.warning("Période %s: programme dual non concluant (%s), repli sur solve_ce", period, verdict.status.value)
            report.fallbacks += 1
            report.distributions.append(solve_ce(game))
    return report


# Pareto --------------------------------------------------------------------


def _weights(game: NormalFormGame, weights: Optional[Sequence[float]]) -> np.ndarray:
    lam = np.ones(game.n_players) if weights is None else np.asarray(weights, dtype=float)
    if lam.size != game.n_players or np.any(lam < 0.0) or not np.any(lam > 0.0):
        raise ValueError(f"Poids invalides: {weights!r}")
    return lam


def pareto_profiles(game: NormalFormGame, weights: Optional[Sequence[float]] = None) -> ParetoProfileSet:
    """Pure profiles that no other profile Pareto-dominates."""

    lam = _weights(game, weights)
    flat = game.flat_utilities
    members: List[int] = []
    for k, row in enumerate(flat):
        dominated = np.any(np.all(flat >= row, axis=1) & np.any(flat > row, axis=1))
        if not dominated:
            members.append(k)

    welfare = flat[members] @ lam
    best = members[int(np.argmax(welfare))]
    return ParetoProfileSet(members=tuple(members), welfare=welfare, weights=lam, best=best)


def pareto_ce(game: NormalFormGame, weights: Optional[Sequence[float]] = None) -> Optional[CorrelatedEquilibrium]:
    """Welfare-maximizing CE supported on Pareto-optimal profiles, if any."""

    pareto = pareto_profiles(game, weights)
    members = list(pareto.members)
    base = ce_constraints(game)
    lp = LinearProgram(
        c=game.flat_utilities[members] @ pareto.weights,
        A=base.A[:, members],
        rhs=base.rhs,
        relations=base.relations,
    )
    verdict = solve_lp(lp)
    if verdict.status is not LpStatus.OPTIMAL:
        logger.info("Aucun équilibre corrélé à support Pareto (statut %s)", verdict.status.value)
        return None

    probs = np.zeros(game.n_profiles)
    probs[members] = verdict.x
    probs = _normalized(probs)
    if not is_ce(game, probs):
        logger.warning("Solution Pareto rejetée par la vérification des contraintes")
        return None
    return CorrelatedEquilibrium(probs=probs, method="pareto")


def sample_profile(ce: CorrelatedEquilibrium, seed: int, period: int) -> int:
    """Index of the joint profile drawn for ``period`` of the run ``seed``."""

    rng = np.random.default_rng([int(seed), int(period)])
    probs = _normalized(ce.probs)
    return int(rng.choice(probs.size, p=probs))


__all__ = [
    "CeCalcReport",
    "CeObjective",
    "CorrelatedEquilibrium",
    "NormalFormGame",
    "ParetoProfileSet",
    "build_stage_game",
    "ce_calc",
    "ce_constraints",
    "dual_feasibility_test",
    "get_dual_distribution",
    "incentive_matrix",
    "incentive_slacks",
    "is_ce",
    "pareto_ce",
    "pareto_profiles",
    "sample_profile",
]
