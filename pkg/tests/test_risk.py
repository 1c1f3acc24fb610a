"""Tests for the CRRA utility."""

from __future__ import annotations

import math

import pytest

from posgi_market.services.risk import concavity_check, crra


class TestCrra:
    """Utility of monetary rewards."""

    @pytest.mark.parametrize("reward", [-3.5, -1e-9, 0.0, 0.25, 42.0])
    def test_risk_neutral_is_identity(self, reward):
        """theta = 0 returns the reward unchanged."""
        assert crra(reward, 0.0) == reward

    def test_positive_reward(self):
        """R^(1-theta) / (1-theta) for positive rewards."""
        assert crra(4.0, 0.5) == pytest.approx(4.0)
        assert crra(2.0, 0.8) == pytest.approx(2.0 ** 0.2 / 0.2)

    def test_zero_reward(self):
        """A zero reward has zero utility."""
        assert crra(0.0, 0.8) == 0.0

    def test_negative_reward_principal_value(self):
        """R = -1, theta = 0.5 maps to the real part of i / 0.5, zero."""
        assert crra(-1.0, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_negative_reward_signed(self):
        """The signed reading mirrors the positive branch."""
        assert crra(-1.0, 0.5, "signed") == pytest.approx(-2.0)

    def test_logarithmic_limit(self):
        """theta = 1 is log |R|."""
        assert crra(math.e, 1.0) == pytest.approx(1.0)

    def test_logarithmic_limit_at_zero_reward(self):
        """A zero reward stays at zero utils under the logarithmic limit."""
        assert crra(0.0, 1.0) == 0.0
        assert crra(0.0, 1.0, "signed") == 0.0

    def test_theta_out_of_range(self):
        """theta must lie in ]-1, 1]."""
        with pytest.raises(ValueError):
            crra(1.0, -1.0)
        with pytest.raises(ValueError):
            crra(1.0, 1.5)

    def test_unknown_mode(self):
        """Only the principal and signed readings exist."""
        with pytest.raises(ValueError):
            crra(-1.0, 0.5, "absolute")


class TestConcavity:
    """Shape of the utility on positive rewards."""

    GRID = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]

    def test_risk_averse_is_concave(self):
        """theta = 0.8 gives a concave utility."""
        assert concavity_check(0.8, self.GRID)

    def test_risk_seeking_is_convex(self):
        """theta = -0.5 gives a convex utility."""
        assert not concavity_check(-0.5, self.GRID)

    def test_risk_neutral_is_linear(self):
        """Linear utility passes the concavity test."""
        assert concavity_check(0.0, self.GRID)

    def test_grid_validation(self):
        """The grid must be positive and increasing."""
        with pytest.raises(ValueError):
            concavity_check(0.5, [1.0, 0.5, 2.0])
        with pytest.raises(ValueError):
            concavity_check(0.5, [1.0, 2.0])
