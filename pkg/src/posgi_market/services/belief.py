"""Exact Bayesian belief filtering over the enumerated market states."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..models.domain import Observation
from .posgi import ObservationModel, StateSpace, TransitionModel

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class BeliefState:
    """Probability vector over the states; ``fallback`` marks a prediction-only update."""

    probs: np.ndarray
    fallback: bool = False

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("Une croyance est un vecteur non vide")
        if np.any(self.probs < -1e-15) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("La croyance doit être une distribution de probabilité")

    @property
    def size(self) -> int:
        return int(self.probs.size)


def uniform_prior(state_count: int) -> BeliefState:
    if state_count < 1:
        raise ValueError(f"Nombre d'états invalide: {state_count}")
    return BeliefState(probs=np.full(state_count, 1.0 / state_count))


def predict_belief(prev: BeliefState, own_action: object, T: TransitionModel) -> np.ndarray:
    """Prediction step ``sum_s T(s, a, s') b(s)``."""

    if T.n_states != prev.size:
        raise ValueError(f"Croyance sur {prev.size} états, T sur {T.n_states}")
    return prev.probs @ T.matrix(own_action)


def update_belief(
    prev: BeliefState,
    own_action: object,
    obs: Union[int, Observation],
    T: TransitionModel,
    omega: ObservationModel,
    signal_prior: np.ndarray,
) -> BeliefState:
    """Posterior ``b'(s') ∝ sum_iota P(iota) Omega(s', iota, o) sum_s T(s, a, s') b(s)``.

    When the observation is impossible under the model the prediction alone is
    returned and flagged, so a run keeps going after a truncated state.
    """

    prior_iota = np.asarray(signal_prior, dtype=float)
    if omega.n_states != prev.size:
        raise ValueError(f"Croyance sur {prev.size} états, Omega sur {omega.n_states}")
    if prior_iota.size != omega.n_signals:
        raise ValueError(f"P(iota) de taille {prior_iota.size} pour {omega.n_signals} signaux")

    predicted = predict_belief(prev, own_action, T)
    index = omega.locate(obs) if isinstance(obs, Observation) else int(obs)
    likelihood = omega.column(index) @ prior_iota

    unnormalized = likelihood * predicted
    evidence = float(unnormalized.sum())
    if evidence <= 0.0:
        logger.warning("Observation %s impossible sous le modèle: mise à jour par prédiction seule", index)
        return BeliefState(probs=predicted / predicted.sum(), fallback=True)
    return BeliefState(probs=unnormalized / evidence)


def outcome_belief(
    belief: BeliefState,
    b: float,
    space: StateSpace,
    *,
    state_prices: Optional[np.ndarray] = None,
) -> float:
    """Expected posted price of the traded security under ``belief``.

    ``state_prices`` may carry ``space.prices(b)`` precomputed by the caller.
    """

    if belief.size != space.size:
        raise ValueError(f"Croyance sur {belief.size} états, espace de {space.size}")
    prices = space.prices(b) if state_prices is None else np.asarray(state_prices, dtype=float)
    if prices.size != space.size:
        raise ValueError("Un prix par état est requis")
    estimate = float(belief.probs @ prices)
    return min(max(estimate, float(prices.min())), float(prices.max()))


__all__ = ["BeliefState", "outcome_belief", "predict_belief", "uniform_prior", "update_belief"]
