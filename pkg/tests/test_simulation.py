"""Tests for the single-event market simulation."""

from __future__ import annotations

import pytest

from posgi_market.models.domain import MarketConfig, StrategyKind
from posgi_market.services.lmsr import price
from posgi_market.services.posgi import build_state_space
from posgi_market.services.simulation import _cancel_overflow, run_market


def _config(**changes) -> MarketConfig:
    data = {"horizon": 6, "seed": 3}
    data.update(changes)
    return MarketConfig(**data)


class TestRunMarket:
    """End-to-end runs."""

    def test_series_lengths(self):
        """Every log covers the horizon."""
        result = run_market(_config())
        assert len(result.prices) == 6
        for agent in range(2):
            assert len(result.actions[agent]) == 6
            assert len(result.utilities[agent]) == 6
        assert result.prices[0] == pytest.approx(0.5)

    def test_deterministic(self):
        """The same config reproduces the same run."""
        first = run_market(_config(strategies=("zip", "gd")))
        second = run_market(_config(strategies=("zip", "gd")))
        assert first.model_dump() == second.model_dump()

    def test_world_independent_of_strategies(self):
        """Signals depend on the seed only."""
        ce = run_market(_config())
        zi = run_market(_config(strategies=("zi", "zi")))
        assert ce.signals == zi.signals

    def test_ce_agents_follow_recommendations(self):
        """CE agents trade exactly what the mediator recommends unless cancelled."""
        result = run_market(_config(max_units=50))
        assert result.recommendations is not None
        assert result.actions == result.recommendations

    def test_no_mediator_without_ce_agents(self):
        """Baseline-only populations get no recommendations."""
        result = run_market(_config(strategies=("zi", "dp")))
        assert result.recommendations is None

    def test_money_is_conserved(self):
        """Agents' total rewards equal the market maker's loss."""
        result = run_market(_config(strategies=("zi", "zi"), horizon=10))
        total = sum(sum(rewards) for rewards in result.rewards)
        assert total == pytest.approx(result.maker_loss, abs=1e-9)
        assert result.maker_loss <= 100.0 * 0.6931471805599453 + 1e-9

    def test_cumulative_utility(self):
        """Cumulative utilities are running sums."""
        result = run_market(_config(strategies=("cp", "zip"), thetas=(0.8, 0.0)))
        for agent in range(2):
            assert result.total_utility(agent) == pytest.approx(sum(result.utilities[agent]))

    def test_final_price_from_closing_quantity(self):
        """The closing quantity is the sum of every order and prices the close."""
        result = run_market(_config(strategies=("zi", "zi")))
        assert result.final_q[0] == pytest.approx(sum(sum(actions) for actions in result.actions))
        assert result.final_price == pytest.approx(price(result.final_q, 100.0)[0])

    @pytest.mark.parametrize("solver", ["utilitarian", "pareto", "algorithm", "auto"])
    def test_every_ce_solver(self, solver):
        """All mediator modes complete a run."""
        result = run_market(_config(horizon=3, ce_solver=solver, thetas=(0.8, 0.8)))
        assert len(result.prices) == 3
        assert result.existence_failures == 0

    def test_empirical_opponent_model(self):
        """The empirical opponent model runs end to end."""
        result = run_market(_config(strategies=("dp", "zi"), opponent_model="empirical"))
        assert len(result.prices) == 6

    def test_dp_orders_ignore_risk_attitude(self):
        """DP maximizes money: its orders do not change with its own theta."""
        neutral = run_market(_config(strategies=("dp", "zi"), horizon=8))
        averse = run_market(_config(strategies=("dp", "zi"), horizon=8, thetas=(0.8, 0.0)))
        assert averse.actions == neutral.actions
        assert averse.utilities[0] != neutral.utilities[0] or not any(neutral.actions[0])

    def test_inventory_floor_prevents_short_sales(self):
        """With a zero floor no agent ends with negative holdings."""
        result = run_market(_config(strategies=("zi", "zi"), horizon=12, inventory_floor=0.0))
        assert all(row[0] >= 0.0 for row in result.holdings)


class TestDefaultMarket:
    """The default CE market over its full horizon."""

    def test_seed_zero_completes(self):
        """Stage games with estimates at the posted price keep a certified CE."""
        result = run_market(MarketConfig(seed=0))
        assert len(result.prices) == 50
        assert result.existence_failures == 0
        assert result.actions == result.recommendations or result.truncation_events > 0

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_every_seed_completes(self, seed):
        """No seed aborts on an unsolved stage game."""
        result = run_market(MarketConfig(seed=seed))
        assert len(result.prices) == 50
        assert result.existence_failures == 0


class TestOverflow:
    """Orders pushing the state past its bounds."""

    def test_last_agents_cancelled_first(self):
        """Excess buys are dropped from the end of the agent list."""
        space = build_state_space((0.0, 0.0), 1, 5)
        actions = [1, 1, 0]
        assert _cancel_overflow(actions, (0.0, 0.0), space)
        assert actions == [1, 0, 0]

    def test_in_bounds_orders_kept(self):
        """Nothing is cancelled inside the grid."""
        space = build_state_space((0.0, 0.0), 1, 5)
        actions = [1, -1]
        assert not _cancel_overflow(actions, (1.0, 0.0), space)
        assert actions == [1, -1]

    def test_truncation_counted(self):
        """A tight state bound keeps prices on the grid and records truncations."""
        result = run_market(_config(strategies=("zi", "zi"), horizon=30, max_units=1, seed=11))
        grid = build_state_space((0.0, 0.0), 1, 30).prices(100.0)
        for posted in result.prices:
            assert min(abs(grid - posted)) < 1e-12
        assert abs(result.final_q[0]) <= 1.0
        assert result.truncation_events >= 1


class TestConfigValidation:
    """MarketConfig invariants."""

    def test_zero_horizon(self):
        """At least one period is required."""
        with pytest.raises(ValueError):
            MarketConfig(horizon=0)

    def test_strategy_count(self):
        """One strategy per agent."""
        with pytest.raises(ValueError):
            MarketConfig(strategies=(StrategyKind.CE,))

    def test_unknown_field(self):
        """Unknown keys are rejected."""
        with pytest.raises(ValueError):
            MarketConfig.model_validate({"horizon": 5, "days": 5})

    def test_default_state_bound(self):
        """The state bound covers n_agents x horizon units."""
        assert MarketConfig(horizon=7).state_bound == 14


class TestInformationAggregation:
    """Prices move toward the realized outcome."""

    @pytest.mark.slow
    def test_ce_prices_rise_when_outcome_is_one(self):
        """Informative signals push the mean final price above the initial one."""
        finals = [
            run_market(_config(horizon=20, seed=seed, outcome=1, info={"positive_prob": 0.9, "reliability": 0.95})).final_price
            for seed in range(100)
        ]
        assert sum(finals) / len(finals) > 0.5
