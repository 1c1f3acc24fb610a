"""Tests for the POSGI state space, transitions and information model."""

from __future__ import annotations

import math

import numpy as np
import pytest

from posgi_market.models.domain import InfoModel, InfoSignal, MarketState, Observation, TradeAction
from posgi_market.services.posgi import (
    ACTION_ORDER,
    PosgiObservationModel,
    TransitionModel,
    agent_transition_model,
    apply_joint_action,
    build_state_space,
    identity_transition_model,
    joint_transition_model,
    observe,
    opponent_move_distribution,
    sample_signals,
    signal_prior,
    transition,
)


@pytest.fixture
def space():
    return build_state_space((0.0, 0.0), 2, 3)


class TestStateSpace:
    """Enumeration of the traded-security quantities."""

    def test_size_and_quantities(self, space):
        """States span q0 - max_units .. q0 + max_units."""
        assert space.size == 5
        assert space.quantities.tolist() == [-2.0, -1.0, 0.0, 1.0, 2.0]

    def test_index_round_trip(self, space):
        """A reachable quantity maps to its index and back."""
        assert space.index_of((1.0, 0.0)) == 3
        assert space.quantities_at(3) == (1.0, 0.0)

    def test_prices_increase_with_quantity(self, space):
        """Buying the traded security raises its price."""
        assert np.all(np.diff(space.prices(100.0)) > 0.0)

    def test_out_of_range_quantity(self, space):
        """Quantities outside the grid are rejected."""
        with pytest.raises(ValueError):
            space.index_of((3.0, 0.0))

    def test_non_traded_security_is_fixed(self, space):
        """Only the traded security moves."""
        with pytest.raises(ValueError):
            space.offset_of((0.0, 1.0))

    def test_invalid_bounds(self):
        """max_units must be positive."""
        with pytest.raises(ValueError):
            build_state_space((0.0, 0.0), 0, 3)


class TestTransitions:
    """Deterministic joint moves and the single-agent models."""

    def test_summed_orders_move_the_state(self, space):
        """The new quantity is q plus the net order."""
        new_q, truncated = apply_joint_action((0.0, 0.0), [1, 1, -1], space)
        assert new_q == (1.0, 0.0)
        assert truncated == 0

    def test_clamping_reports_truncated_units(self, space):
        """Moves past the border are clamped and counted."""
        new_q, truncated = apply_joint_action((2.0, 0.0), [1, 1], space)
        assert new_q == (2.0, 0.0)
        assert truncated == 2

    def test_without_clamp_overflow_raises(self):
        """An unclamped space refuses to leave its grid."""
        space = build_state_space((0.0, 0.0), 3, 3, clamp=False)
        with pytest.raises(ValueError):
            apply_joint_action((3.0, 0.0), [1], space)

    def test_transition_advances_period(self, space):
        """transition moves one period forward."""
        state = MarketState(q=(0.0, 0.0), period=0, horizon=3)
        nxt = transition(state, [1, 0], space)
        assert nxt.period == 1
        assert nxt.q == (1.0, 0.0)

    def test_no_transition_from_last_period(self, space):
        """The last period closes the market."""
        state = MarketState(q=(0.0, 0.0), period=2, horizon=3)
        with pytest.raises(ValueError):
            transition(state, [0, 0], space)

    def test_opponent_net_move_is_convolution(self):
        """Two uniform opponents move by -2..2 with weights 1,2,3,2,1."""
        law = opponent_move_distribution(3)
        assert np.allclose(law, np.array([1, 2, 3, 2, 1]) / 9.0)

    def test_agent_model_rows_are_distributions(self, space):
        """Each row of the single-agent T sums to one."""
        model = agent_transition_model(space, opponent_move_distribution(2))
        assert np.allclose(model.matrices.sum(axis=2), 1.0)

    def test_agent_model_spreads_own_buy(self, space):
        """A buy from the centre lands on offsets 0, 1, 2 with one opponent."""
        model = agent_transition_model(space, opponent_move_distribution(2))
        row = model.matrix(TradeAction.BUY)[2]
        assert np.allclose(row, [0.0, 0.0, 1 / 3, 1 / 3, 1 / 3])

    def test_joint_model_enumerates_profiles(self, space):
        """Two agents have nine joint actions."""
        model = joint_transition_model(space, 2)
        assert len(model.actions) == 9
        assert model.matrix((TradeAction.BUY, TradeAction.BUY))[2, 4] == 1.0

    def test_identity_model(self, space):
        """The identity model keeps every state."""
        model = identity_transition_model(space)
        assert np.array_equal(model.matrix(TradeAction.HOLD), np.eye(5))

    def test_malformed_transition_rows(self):
        """Rows that are not distributions are rejected."""
        with pytest.raises(ValueError):
            TransitionModel(matrices=np.full((1, 2, 2), 0.4), actions=(TradeAction.HOLD,))


class TestInformation:
    """Signal arrival, prior and observations."""

    def test_signal_prior(self):
        """P(0) is the Poisson no-arrival probability."""
        prior = signal_prior(InfoModel(rate=0.5))
        assert prior.sum() == pytest.approx(1.0)
        assert prior[1] == pytest.approx(math.exp(-0.5))
        assert prior[0] == pytest.approx(prior[2])

    def test_no_arrivals_without_rate(self):
        """A zero rate never produces a signal."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert sample_signals(rng, InfoModel(rate=0.0), 1, 3).tolist() == [0, 0, 0]

    def test_reliable_truthful_signals(self):
        """Perfect signals point to the realized outcome."""
        rng = np.random.default_rng(1)
        model = InfoModel(rate=50.0, positive_prob=1.0, reliability=1.0)
        assert sample_signals(rng, model, 1, 2).tolist() == [1, 1]
        assert sample_signals(rng, model, 0, 2).tolist() == [-1, -1]

    def test_observe_posts_traded_price(self):
        """An observation carries the posted price and the signal."""
        obs = observe(MarketState(q=(0.0, 0.0), horizon=2), 100.0, 1)
        assert obs.posted_price == pytest.approx(0.5)
        assert obs.signal is InfoSignal.POSITIVE


class TestObservationModel:
    """Factorized price-times-signal observation model."""

    def test_locate_encodes_state_and_signal(self, space):
        """o = 3 * state + signal + 1."""
        omega = PosgiObservationModel(space, 100.0, 0.9)
        obs = Observation(posted_price=float(space.prices(100.0)[3]), signal=InfoSignal.NEGATIVE)
        assert omega.locate(obs) == 9

    def test_unknown_price(self, space):
        """A price absent from the grid cannot be located."""
        omega = PosgiObservationModel(space, 100.0, 0.9)
        with pytest.raises(ValueError):
            omega.locate(Observation(posted_price=0.123))

    def test_ambiguous_price_is_refused(self):
        """A grid finer than the matching tolerance cannot pin a state."""
        fine = build_state_space((0.0, 0.0), 2, 3)
        omega = PosgiObservationModel(fine, 1e10, 0.9)
        with pytest.raises(ValueError, match="ambigu"):
            omega.locate(Observation(posted_price=0.5))

    def test_dense_form_is_normalized(self, space):
        """Every (state, signal) row of the dense model sums to one."""
        dense = PosgiObservationModel(space, 100.0, 0.7).to_dense()
        assert dense.probs.shape == (5, 3, 15)
        assert np.allclose(dense.probs.sum(axis=2), 1.0)

    def test_action_order(self):
        """Stage games list sell, hold, buy."""
        assert [int(a) for a in ACTION_ORDER] == [-1, 0, 1]


class TestSignalThinning:
    """Per-agent reliability of the signal channel."""

    def test_nonzero_frequency_matches_reliability(self):
        """An agent sees an arrived signal with probability rho."""
        rng = np.random.default_rng(41)
        model = InfoModel(rate=0.5, positive_prob=0.8, reliability=(0.3, 0.9))
        draws = 20_000
        seen = np.zeros(2)
        for _ in range(draws):
            seen += sample_signals(rng, model, 1, 2) != 0
        arrival = 1.0 - math.exp(-0.5)
        for agent, rho in enumerate((0.3, 0.9)):
            expected = arrival * rho
            sigma = math.sqrt(draws * expected * (1.0 - expected))
            assert abs(seen[agent] - draws * expected) <= 4.0 * sigma
