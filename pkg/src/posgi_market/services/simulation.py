"""Single-event market simulation.

Each period: the market maker posts its price, signals arrive, every agent
filters its belief and forms an outcome estimate, the mediator (when CE agents
trade) draws a joint recommendation, agents decide simultaneously and the
joint order is executed atomically with order-symmetrized LMSR pricing.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..models.domain import MarketConfig, MarketState, RunResult, StrategyKind, TradeAction
from .belief import BeliefState, outcome_belief, uniform_prior, update_belief
from .equilibrium import (
    CorrelatedEquilibrium,
    NormalFormGame,
    build_stage_game,
    ce_calc,
    dual_feasibility_test,
    pareto_ce,
    sample_profile,
    solve_ce,
)
from .lmsr import LmsrMarketMaker, price
from .posgi import (
    ACTION_ORDER,
    PosgiObservationModel,
    StateSpace,
    TransitionModel,
    agent_transition_model,
    apply_joint_action,
    build_state_space,
    identity_transition_model,
    observe,
    opponent_move_distribution,
    sample_signals,
    signal_prior,
    transition,
)
from .risk import crra
from .strategies import DecisionContext, decide, new_strategy_state

logger = logging.getLogger(__name__)

_ESTIMATE_BOUNDS = (0.01, 0.99)


@dataclass(slots=True)
class _Counters:
    truncation: int = 0
    fallback: int = 0
    inconsistency: int = 0
    existence: int = 0


@dataclass(slots=True)
class _AgentBook:
    """Per-agent logs, indexed by period."""

    actions: List[int] = field(default_factory=list)
    signals: List[int] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    utilities: List[float] = field(default_factory=list)
    cumulative: List[float] = field(default_factory=list)
    recommendations: List[int] = field(default_factory=list)


# Mediator --------------------------------------------------------------------


def _recommend(config: MarketConfig, game: NormalFormGame, counters: _Counters, period: int) -> CorrelatedEquilibrium:
    """CE the market maker samples its recommendation from."""

    mode = config.ce_solver
    if mode == "auto":
        mode = "pareto" if config.risk_averse else "utilitarian"

    if mode == "utilitarian":
        return solve_ce(game)
    if mode == "algorithm":
        report = ce_calc(
            1,
            lambda _: game,
            epsilon=config.dual_epsilon,
            max_iterations=config.dual_max_iterations,
        )
        counters.fallback += report.fallbacks
        return report.distributions[0]

    ce = pareto_ce(game)
    if ce is None:
        logger.warning("Période %s: aucun équilibre corrélé Pareto, repli sur l'équilibre utilitariste", period)
        counters.fallback += 1
        return solve_ce(game)
    return ce


def _clamp_estimate(value: float) -> float:
    low, high = _ESTIMATE_BOUNDS
    return min(max(value, low), high)


def _cancel_overflow(actions: List[int], q: tuple, space: StateSpace) -> bool:
    """Drop orders pushing the state outside the grid, last agents first."""

    _, truncated = apply_joint_action(q, actions, space) if space.clamp else (None, 0)
    if not truncated:
        return False
    direction = 1 if sum(actions) > 0 else -1
    for agent in reversed(range(len(actions))):
        if truncated == 0:
            break
        if actions[agent] == direction:
            actions[agent] = int(TradeAction.HOLD)
            truncated -= 1
    return True


def run_market(config: MarketConfig) -> RunResult:
    """Simulate one event end to end; deterministic given ``config``."""

    n = config.n_agents
    horizon = config.horizon
    sec = config.traded_security
    b = config.liquidity

    seeds = np.random.SeedSequence(config.seed).spawn(n + 1)
    world_rng = np.random.default_rng(seeds[0])
    agent_rngs = [np.random.default_rng(s) for s in seeds[1:]]

    space = build_state_space(config.initial_q, config.state_bound, horizon, traded_security=sec, clamp=config.clamp)
    state_prices = space.prices(b)
    maker = LmsrMarketMaker(config.initial_q, b, n, inventory_floor=config.inventory_floor)
    prior_iota = signal_prior(config.info)
    omegas = [PosgiObservationModel(space, b, config.info.reliability_for(i)) for i in range(n)]
    identity = identity_transition_model(space)
    uniform_model = agent_transition_model(space, opponent_move_distribution(n))
    move_counts = [np.ones(2 * n - 1) for _ in range(n)]

    beliefs: List[BeliefState] = [uniform_prior(space.size) for _ in range(n)]
    states = [
        new_strategy_state(
            kind,
            config.strategy_params,
            config.info,
            agent=i,
        )
        for i, kind in enumerate(config.strategies)
    ]
    uses_mediator = StrategyKind.CE in config.strategies

    books = [_AgentBook() for _ in range(n)]
    counters = _Counters()
    prices: List[float] = []
    state = MarketState(q=tuple(config.initial_q), period=0, horizon=horizon)
    last_actions = [int(TradeAction.HOLD)] * n
    last_rewards = [0.0] * n
    final_q = tuple(config.initial_q)
    settlement = np.zeros(n)

    logger.debug("Démarrage de la simulation (seed %s, stratégies %s)", config.seed, [s.value for s in config.strategies])

    for period in range(horizon):
        prices.append(float(price(state.q, b)[sec]))
        signals = sample_signals(world_rng, config.info, config.outcome, n)

        estimates: List[float] = []
        observations = []
        for i in range(n):
            obs = observe(state, b, int(signals[i]), traded_security=sec)
            observations.append(obs)
            if period == 0:
                model: TransitionModel = identity
            elif config.opponent_model == "empirical":
                law = move_counts[i] / move_counts[i].sum()
                model = agent_transition_model(space, law)
            else:
                model = uniform_model
            beliefs[i] = update_belief(beliefs[i], last_actions[i], obs, model, omegas[i], prior_iota)
            if beliefs[i].fallback:
                counters.inconsistency += 1
            estimate = outcome_belief(beliefs[i], b, space, state_prices=state_prices)
            estimates.append(_clamp_estimate(estimate + config.signal_shift * int(signals[i])))

        recommendation: Optional[List[int]] = None
        if uses_mediator:
            game = build_stage_game(
                state,
                b,
                estimates,
                config.thetas,
                traded_security=sec,
                negative_mode=config.negative_utility,
            )
            if config.audit_existence and not dual_feasibility_test(game):
                counters.existence += 1
                logger.error("Période %s: le test dual ne certifie pas l'existence d'un équilibre corrélé", period)
            ce = _recommend(config, game, counters, period)
            profile = game.profiles[sample_profile(ce, config.seed, period)]
            recommendation = [int(ACTION_ORDER[k]) for k in profile]

        actions: List[int] = []
        for i, kind in enumerate(config.strategies):
            context = DecisionContext(
                observation=observations[i],
                outcome_estimate=estimates[i],
                period=period,
                horizon=horizon,
                quantities=tuple(state.q),
                liquidity=b,
                traded_security=sec,
                last_reward=last_rewards[i],
                recommendation=None if recommendation is None else recommendation[i],
            )
            action = int(decide(kind, states[i], context, agent_rngs[i]))
            if not maker.allows(i, sec, action):
                action = int(TradeAction.HOLD)
            actions.append(action)

        if _cancel_overflow(actions, state.q, space):
            counters.truncation += 1
            logger.warning("Période %s: ordres annulés en bordure de l'espace d'états (±%s)", period, space.max_units)

        payments = maker.execute(sec, actions)
        rewards = -payments
        if period == horizon - 1:
            settlement = maker.settle(config.realized_security)
            rewards = rewards + settlement

        for i in range(n):
            book = books[i]
            utility = crra(float(rewards[i]), config.thetas[i], config.negative_utility)
            book.actions.append(actions[i])
            book.signals.append(int(signals[i]))
            book.rewards.append(float(rewards[i]))
            book.utilities.append(utility)
            book.cumulative.append((book.cumulative[-1] if book.cumulative else 0.0) + utility)
            if recommendation is not None:
                book.recommendations.append(recommendation[i])

        net = sum(actions)
        for i in range(n):
            move_counts[i][net - actions[i] + n - 1] += 1.0

        if period < horizon - 1:
            state = transition(state, actions, space)
        else:
            final_q, _ = apply_joint_action(state.q, actions, space)

        last_actions = actions
        last_rewards = [float(r) for r in rewards]
        if config.pace_seconds > 0.0:
            time.sleep(config.pace_seconds)

    final_price = float(price(final_q, b)[sec])
    logger.info(
        "Simulation terminée (seed %s): prix final %.4f, perte du teneur de marché %.4f",
        config.seed,
        final_price,
        maker.loss,
    )

    return RunResult(
        seed=config.seed,
        strategies=list(config.strategies),
        thetas=list(config.thetas),
        outcome=config.outcome,
        prices=prices,
        final_q=list(final_q),
        final_price=final_price,
        actions=[book.actions for book in books],
        signals=[book.signals for book in books],
        rewards=[book.rewards for book in books],
        utilities=[book.utilities for book in books],
        cumulative_utilities=[book.cumulative for book in books],
        recommendations=[book.recommendations for book in books] if uses_mediator else None,
        settlement=settlement.tolist(),
        holdings=maker.holdings.tolist(),
        agent_cash=maker.agent_cash.tolist(),
        maker_cash=maker.collected,
        maker_loss=maker.loss,
        truncation_events=counters.truncation,
        fallback_events=counters.fallback,
        inconsistency_events=counters.inconsistency,
        existence_failures=counters.existence,
        config=config,
    )


__all__ = ["run_market"]
