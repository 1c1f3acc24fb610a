"""Partially observable stochastic game with information (POSGI) primitives.

The hidden state of a market is the outstanding quantity of the traded
security (the complementary quantity never moves), enumerated on a bounded
grid around its initial value. Joint actions move it deterministically by the
sum of the unit orders; agents only see the posted price and a private
information signal.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from ..models.domain import InfoModel, InfoSignal, MarketState, Observation, TradeAction
from .lmsr import price, price_rows

logger = logging.getLogger(__name__)

ACTION_ORDER: Tuple[TradeAction, ...] = (TradeAction.SELL, TradeAction.HOLD, TradeAction.BUY)
SIGNAL_ORDER: Tuple[InfoSignal, ...] = (InfoSignal.NEGATIVE, InfoSignal.NONE, InfoSignal.POSITIVE)
_PRICE_MATCH_TOL = 1e-9
_ROW_SUM_TOL = 1e-12


# State space --------------------------------------------------------------


@dataclass(slots=True)
class StateSpace:
    """Traded-security quantities ``q0 - max_units .. q0 + max_units``."""

    initial_q: Tuple[float, ...]
    max_units: int
    horizon: int
    traded_security: int = 0
    clamp: bool = True

    @property
    def size(self) -> int:
        return 2 * self.max_units + 1

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.max_units, self.max_units + 1)

    @property
    def quantities(self) -> np.ndarray:
        return self.initial_q[self.traded_security] + self.offsets.astype(float)

    def offset_of(self, q: Sequence[float]) -> int:
        delta = float(q[self.traded_security]) - self.initial_q[self.traded_security]
        offset = round(delta)
        if abs(delta - offset) > 1e-9:
            raise ValueError(f"Quantité {q!r} non atteignable par des échanges unitaires")
        for k, (value, start) in enumerate(zip(q, self.initial_q)):
            if k != self.traded_security and value != start:
                raise ValueError(f"Seul le titre {self.traded_security} est échangé: {q!r}")
        return int(offset)

    def index_of(self, q: Sequence[float]) -> int:
        offset = self.offset_of(q)
        if abs(offset) > self.max_units:
            raise ValueError(f"Quantité {q!r} hors de l'espace d'états (±{self.max_units})")
        return offset + self.max_units

    def quantities_at(self, index: int) -> Tuple[float, ...]:
        if not 0 <= index < self.size:
            raise ValueError(f"Indice d'état invalide: {index}")
        q = list(self.initial_q)
        q[self.traded_security] += index - self.max_units
        return tuple(q)

    def prices(self, b: float) -> np.ndarray:
        """Posted price of the traded security in every state."""

        grid = np.tile(np.asarray(self.initial_q, dtype=float), (self.size, 1))
        grid[:, self.traded_security] = self.quantities
        return price_rows(grid, b)[:, self.traded_security]

    def clamp_offset(self, offset: int) -> int:
        return max(-self.max_units, min(self.max_units, offset))


def build_state_space(
    initial_q: Sequence[float],
    max_units: int,
    horizon: int,
    *,
    traded_security: int = 0,
    clamp: bool = True,
) -> StateSpace:
    if max_units <= 0:
        raise ValueError(f"max_units doit être > 0: {max_units}")
    if horizon < 1:
        raise ValueError(f"L'horizon doit être >= 1: {horizon}")
    if not clamp and max_units < horizon:
        raise ValueError("Sans troncature, max_units doit être >= horizon")
    q0 = tuple(float(v) for v in initial_q)
    if not 0 <= traded_security < len(q0):
        raise ValueError(f"Titre échangé invalide: {traded_security}")
    return StateSpace(
        initial_q=q0,
        max_units=int(max_units),
        horizon=int(horizon),
        traded_security=int(traded_security),
        clamp=clamp,
    )


# Transitions --------------------------------------------------------------


def apply_joint_action(
    q: Sequence[float],
    actions: Sequence[int],
    space: StateSpace,
) -> Tuple[Tuple[float, ...], int]:
    """Move ``q`` by the summed orders; return the new q and truncated units."""

    for action in actions:
        if int(action) not in (-1, 0, 1):
            raise ValueError(f"Action invalide: {action}")
    offset = space.offset_of(q)
    target = offset + sum(int(a) for a in actions)
    bounded = space.clamp_offset(target)
    truncated = abs(target - bounded)
    if truncated and not space.clamp:
        raise ValueError(f"Transition hors des bornes (décalage {target}, ±{space.max_units})")

    new_q = list(q)
    new_q[space.traded_security] = space.initial_q[space.traded_security] + bounded
    return tuple(float(v) for v in new_q), truncated


def transition(s: MarketState, actions: Sequence[int], space: StateSpace) -> MarketState:
    """Next-period state after the joint action ``actions``."""

    if s.period >= s.horizon - 1:
        raise ValueError(f"Aucune transition depuis la dernière période ({s.period})")
    new_q, truncated = apply_joint_action(s.q, actions, space)
    if truncated:
        logger.warning(
            "Troncature de l'état: %s unité(s) hors de ±%s à la période %s",
            truncated,
            space.max_units,
            s.period,
        )
    return MarketState(q=new_q, period=s.period + 1, horizon=s.horizon)


@dataclass(slots=True)
class TransitionModel:
    """``matrices[a, s, s'] = P(s' | s, a)`` for every action label."""

    matrices: np.ndarray
    actions: Tuple[object, ...]

    def __post_init__(self) -> None:
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise ValueError(f"Matrices de transition mal formées: {self.matrices.shape}")
        if self.matrices.shape[0] != len(self.actions):
            raise ValueError("Une matrice par action est requise")
        if np.any(self.matrices < 0.0):
            raise ValueError("Probabilités de transition négatives")
        sums = self.matrices.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL * self.matrices.shape[2]):
            raise ValueError("Chaque ligne de T doit sommer à 1")

    @property
    def n_states(self) -> int:
        return int(self.matrices.shape[1])

    def matrix(self, action: object) -> np.ndarray:
        try:
            return self.matrices[self.actions.index(action)]
        except ValueError as exc:
            raise ValueError(f"Action inconnue du modèle de transition: {action!r}") from exc


def identity_transition_model(space: StateSpace) -> TransitionModel:
    eye = np.eye(space.size)
    return TransitionModel(matrices=np.stack([eye] * len(ACTION_ORDER)), actions=ACTION_ORDER)


def opponent_move_distribution(
    n_agents: int,
    per_opponent: Optional[Union[Sequence[float], Sequence[Sequence[float]]]] = None,
) -> np.ndarray:
    """Distribution of the opponents' net move over ``-(n-1) .. n-1``.

    ``per_opponent`` holds P(sell, hold, buy), either one vector shared by all
    opponents or one vector per opponent; uniform when omitted.
    """

    opponents = n_agents - 1
    if opponents < 1:
        raise ValueError("Au moins un adversaire est requis")
    if per_opponent is None:
        laws = np.full((opponents, 3), 1.0 / 3.0)
    else:
        arr = np.asarray(per_opponent, dtype=float)
        laws = np.tile(arr, (opponents, 1)) if arr.ndim == 1 else arr
    if laws.shape != (opponents, 3):
        raise ValueError(f"Loi des adversaires mal formée: {laws.shape}")
    if np.any(laws < 0.0) or np.any(np.abs(laws.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("Chaque loi d'adversaire doit être une distribution")

    net = np.array([1.0])
    for law in laws:
        net = np.convolve(net, law)
    return net


def agent_transition_model(space: StateSpace, net_moves: np.ndarray) -> TransitionModel:
    """Single-agent T marginalizing the opponents' net move."""

    span = (net_moves.size - 1) // 2
    matrices = np.zeros((len(ACTION_ORDER), space.size, space.size))
    for a_idx, action in enumerate(ACTION_ORDER):
        for s in range(space.size):
            offset = s - space.max_units
            for k, prob in enumerate(net_moves):
                if prob == 0.0:
                    continue
                target = space.clamp_offset(offset + int(action) + k - span)
                matrices[a_idx, s, target + space.max_units] += prob
    return TransitionModel(matrices=matrices, actions=ACTION_ORDER)


def joint_transition_model(space: StateSpace, n_agents: int) -> TransitionModel:
    """Deterministic T over every joint action (lexicographic order)."""

    profiles = tuple(itertools.product(ACTION_ORDER, repeat=n_agents))
    matrices = np.zeros((len(profiles), space.size, space.size))
    for p_idx, profile in enumerate(profiles):
        move = sum(int(a) for a in profile)
        for s in range(space.size):
            target = space.clamp_offset(s - space.max_units + move)
            matrices[p_idx, s, target + space.max_units] = 1.0
    return TransitionModel(matrices=matrices, actions=profiles)


# Information --------------------------------------------------------------


def sample_signals(
    rng: np.random.Generator,
    model: InfoModel,
    outcome: int,
    n_agents: int,
) -> np.ndarray:
    """Signals observed by each agent during one period."""

    arrivals = int(rng.poisson(model.rate))
    if arrivals == 0:
        return np.zeros(n_agents, dtype=int)

    positive = model.positive_prob if outcome == 1 else 1.0 - model.positive_prob
    true_signal = 1 if rng.random() < positive else -1
    reliability = np.array([model.reliability_for(i) for i in range(n_agents)])
    seen = rng.random(n_agents) < reliability
    return np.where(seen, true_signal, 0).astype(int)


def signal_prior(model: InfoModel) -> np.ndarray:
    """P(iota) over (-1, 0, +1) under an uninformative outcome prior."""

    quiet = math.exp(-model.rate)
    return np.array([(1.0 - quiet) / 2.0, quiet, (1.0 - quiet) / 2.0])


def observe(s: MarketState, b: float, signal: int, *, traded_security: int = 0) -> Observation:
    return Observation(posted_price=float(price(s.q, b)[traded_security]), signal=InfoSignal(int(signal)))


# Observation models -------------------------------------------------------


class ObservationModel(Protocol):
    n_states: int
    n_signals: int

    def column(self, observation: int) -> np.ndarray: ...

    def locate(self, observation: Observation) -> int: ...


@dataclass(slots=True)
class DenseObservationModel:
    """Tabulated ``probs[s, iota, o] = P(o | s, iota)``."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 3:
            raise ValueError(f"Modèle d'observation mal formé: {self.probs.shape}")
        if np.any(self.probs < 0.0):
            raise ValueError("Probabilités d'observation négatives")
        if np.any(np.abs(self.probs.sum(axis=2) - 1.0) > _ROW_SUM_TOL * self.probs.shape[2]):
            raise ValueError("P(. | s, iota) doit sommer à 1")

    @property
    def n_states(self) -> int:
        return int(self.probs.shape[0])

    @property
    def n_signals(self) -> int:
        return int(self.probs.shape[1])

    def column(self, observation: int) -> np.ndarray:
        if not 0 <= observation < self.probs.shape[2]:
            raise ValueError(f"Indice d'observation invalide: {observation}")
        return self.probs[:, :, observation]

    def locate(self, observation: Observation) -> int:
        raise ValueError("Un modèle tabulé s'interroge par indice d'observation")


class PosgiObservationModel:
    """Exact posted price times a noisy signal channel.

    Observation ``o = 3 * state_index + (signal + 1)``; the price pins the
    state, the signal equals ``iota`` with probability rho and is 0 otherwise.
    """

    n_signals = len(SIGNAL_ORDER)

    def __init__(self, space: StateSpace, b: float, reliability: float) -> None:
        if not 0.0 <= reliability <= 1.0:
            raise ValueError(f"Fiabilité hors de [0, 1]: {reliability}")
        self.space = space
        self.liquidity = b
        self.reliability = reliability
        self.state_prices = space.prices(b)
        self._channel = self._signal_channel(reliability)

    @staticmethod
    def _signal_channel(rho: float) -> np.ndarray:
        # channel[iota, sigma] = P(sigma | iota), both indexed by value + 1
        channel = np.zeros((3, 3))
        channel[0, 0] = rho
        channel[0, 1] = 1.0 - rho
        channel[1, 1] = 1.0
        channel[2, 2] = rho
        channel[2, 1] = 1.0 - rho
        return channel

    @property
    def n_states(self) -> int:
        return self.space.size

    @property
    def n_observations(self) -> int:
        return self.space.size * self.n_signals

    def column(self, observation: int) -> np.ndarray:
        if not 0 <= observation < self.n_observations:
            raise ValueError(f"Indice d'observation invalide: {observation}")
        state, sigma = divmod(observation, self.n_signals)
        col = np.zeros((self.space.size, self.n_signals))
        col[state] = self._channel[:, sigma]
        return col

    def locate(self, observation: Observation) -> int:
        """Observation index of a posted price and signal.

        The price must match exactly one state within ``_PRICE_MATCH_TOL``;
        a grid too fine for that tolerance is refused rather than resolved
        to the first close state.
        """

        gaps = np.abs(self.state_prices - observation.posted_price)
        matches = np.flatnonzero(gaps <= _PRICE_MATCH_TOL)
        if matches.size == 0:
            raise ValueError(f"Prix affiché {observation.posted_price} absent de l'espace d'états")
        if matches.size > 1:
            raise ValueError(
                f"Prix affiché {observation.posted_price} ambigu: {matches.size} états à moins de {_PRICE_MATCH_TOL}"
            )
        state = int(matches[0])
        return state * self.n_signals + int(observation.signal) + 1

    def to_dense(self) -> DenseObservationModel:
        probs = np.stack([self.column(o) for o in range(self.n_observations)], axis=2)
        return DenseObservationModel(probs=probs)


__all__ = [
    "ACTION_ORDER",
    "DenseObservationModel",
    "ObservationModel",
    "PosgiObservationModel",
    "SIGNAL_ORDER",
    "StateSpace",
    "TransitionModel",
    "agent_transition_model",
    "apply_joint_action",
    "build_state_space",
    "identity_transition_model",
    "joint_transition_model",
    "observe",
    "opponent_move_distribution",
    "sample_signals",
    "signal_prior",
    "transition",
]
