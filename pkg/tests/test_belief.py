"""Tests for the Bayesian belief filter."""

from __future__ import annotations

import numpy as np
import pytest

from posgi_market.models.domain import InfoModel, InfoSignal, Observation, TradeAction
from posgi_market.services.belief import (
    BeliefState,
    outcome_belief,
    predict_belief,
    uniform_prior,
    update_belief,
)
from posgi_market.services.posgi import (
    PosgiObservationModel,
    agent_transition_model,
    build_state_space,
    identity_transition_model,
    opponent_move_distribution,
    signal_prior,
)


@pytest.fixture
def space():
    return build_state_space((0.0, 0.0), 2, 3)


@pytest.fixture
def omega(space):
    return PosgiObservationModel(space, 100.0, 0.9)


def _observation(space, index, signal=InfoSignal.NONE):
    return Observation(posted_price=float(space.prices(100.0)[index]), signal=signal)


class TestBeliefState:
    """Validation of belief vectors."""

    def test_uniform_prior(self):
        """The uniform prior sums to one."""
        belief = uniform_prior(7)
        assert belief.probs.sum() == pytest.approx(1.0)
        assert belief.size == 7

    def test_rejects_non_distribution(self):
        """Beliefs must sum to one."""
        with pytest.raises(ValueError):
            BeliefState(probs=np.array([0.5, 0.6]))


class TestUpdate:
    """Prediction and correction steps."""

    def test_price_pins_the_state(self, space, omega):
        """Observing a posted price concentrates the belief on its state."""
        prior = uniform_prior(space.size)
        posterior = update_belief(
            prior,
            TradeAction.HOLD,
            _observation(space, 3),
            identity_transition_model(space),
            omega,
            signal_prior(InfoModel()),
        )
        assert not posterior.fallback
        assert posterior.probs[3] == pytest.approx(1.0)

    def test_integer_observation_index(self, space, omega):
        """Observations may be given by their index."""
        posterior = update_belief(
            uniform_prior(space.size),
            TradeAction.HOLD,
            3 * 1 + 1,
            identity_transition_model(space),
            omega,
            signal_prior(InfoModel()),
        )
        assert posterior.probs[1] == pytest.approx(1.0)

    def test_impossible_observation_falls_back(self, space, omega):
        """An impossible observation keeps the prediction and flags it."""
        prior = BeliefState(probs=np.eye(space.size)[0])
        posterior = update_belief(
            prior,
            TradeAction.HOLD,
            _observation(space, 4),
            identity_transition_model(space),
            omega,
            signal_prior(InfoModel()),
        )
        assert posterior.fallback
        assert np.allclose(posterior.probs, prior.probs)

    def test_prediction_uses_opponent_model(self, space):
        """Predicting after a buy from the centre spreads over three states."""
        model = agent_transition_model(space, opponent_move_distribution(2))
        prior = BeliefState(probs=np.eye(space.size)[2])
        predicted = predict_belief(prior, TradeAction.BUY, model)
        assert np.allclose(predicted, [0.0, 0.0, 1 / 3, 1 / 3, 1 / 3])

    def test_size_mismatch(self, space, omega):
        """The belief and the models must share the state space."""
        with pytest.raises(ValueError):
            update_belief(
                uniform_prior(3),
                TradeAction.HOLD,
                0,
                identity_transition_model(space),
                omega,
                signal_prior(InfoModel()),
            )


class TestOutcomeBelief:
    """Expected posted price under a belief."""

    def test_point_mass_returns_state_price(self, space):
        """A certain belief returns the price of its state."""
        belief = BeliefState(probs=np.eye(space.size)[4])
        assert outcome_belief(belief, 100.0, space) == pytest.approx(space.prices(100.0)[4])

    def test_uniform_belief_is_symmetric(self, space):
        """A symmetric grid around q0 averages to one half."""
        assert outcome_belief(uniform_prior(space.size), 100.0, space) == pytest.approx(0.5)


class TestAgainstEnumeration:
    """The filter against an explicit sum over states and signals."""

    def test_posterior_matches_brute_force(self, space):
        """b'(s') is the normalized sum over s and iota of the model terms."""
        rng = np.random.default_rng(31)
        omega = PosgiObservationModel(space, 100.0, 0.7)
        dense = omega.to_dense().probs
        T = agent_transition_model(space, opponent_move_distribution(2))
        prior_iota = signal_prior(InfoModel(rate=0.8))
        checked = 0
        for _ in range(40):
            prev = BeliefState(probs=rng.dirichlet(np.ones(space.size)))
            action = TradeAction(int(rng.integers(-1, 2)))
            obs = int(rng.integers(dense.shape[2]))
            matrix = T.matrix(action)

            expected = np.zeros(space.size)
            for target in range(space.size):
                moved = sum(matrix[s, target] * prev.probs[s] for s in range(space.size))
                seen = sum(prior_iota[iota] * dense[target, iota, obs] for iota in range(3))
                expected[target] = seen * moved
            if expected.sum() <= 0.0:
                continue
            expected /= expected.sum()

            posterior = update_belief(prev, action, obs, T, omega, prior_iota)
            assert not posterior.fallback
            assert np.allclose(posterior.probs, expected, atol=1e-12)
            checked += 1
        assert checked > 0
