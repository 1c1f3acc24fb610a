"""Trading strategies behind one decision interface.

Every strategy sees the same information: the posted price of the traded
security, its own signal and its outcome estimate ``p_hat``. The order-book
strategies (ZIP, CP, GD) are re-targeted to the posted-price market maker:
limit prices are built from ``p_hat`` and compared with the posted price.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import ClassVar, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.domain import InfoModel, Observation, StrategyKind, StrategyParams, TradeAction
from .lmsr import buy_payment, sell_payout
from .posgi import ACTION_ORDER

logger = logging.getLogger(__name__)

_MAX_MARGIN = 0.99
_TIE_TOL = 1e-12


@dataclass(slots=True)
class DecisionContext:
    """What an agent knows when it picks its order for a period."""

    observation: Observation
    outcome_estimate: float
    period: int
    horizon: int
    quantities: Tuple[float, ...]
    liquidity: float
    traded_security: int = 0
    last_reward: float = 0.0
    recommendation: Optional[int] = None

    @property
    def posted_price(self) -> float:
        return self.observation.posted_price

    @property
    def remaining(self) -> int:
        return self.horizon - self.period


# Strategy states -------------------------------------------------------------


@dataclass(slots=True)
class ZiState:
    kind: ClassVar[StrategyKind] = StrategyKind.ZI


@dataclass(slots=True)
class ZipState:
    """Separate buy and sell profit margins, Widrow-Hoff updated."""

    kind: ClassVar[StrategyKind] = StrategyKind.ZIP
    margin_buy: float = 0.05
    margin_sell: float = 0.05
    beta: float = 0.1


@dataclass(slots=True)
class CpState:
    """One margin sized on how far the estimate and the posted price last moved."""

    kind: ClassVar[StrategyKind] = StrategyKind.CP
    margin: float = 0.05
    beta: float = 0.1
    last_price: Optional[float] = None
    last_estimate: Optional[float] = None


@dataclass(slots=True)
class GdState:
    """Posted-price history; ``window`` keeps the most recent prices only."""

    kind: ClassVar[StrategyKind] = StrategyKind.GD
    prices: List[float] = field(default_factory=list)
    window: Optional[int] = None


@dataclass(slots=True)
class DpState:
    kind: ClassVar[StrategyKind] = StrategyKind.DP
    info: InfoModel = field(default_factory=InfoModel)
    reliability: float = 0.9
    grid_size: int = 51


@dataclass(slots=True)
class CeState:
    kind: ClassVar[StrategyKind] = StrategyKind.CE
    followed: int = 0


StrategyState = Union[ZiState, ZipState, CpState, GdState, DpState, CeState]


def new_strategy_state(
    kind: StrategyKind,
    params: Optional[StrategyParams] = None,
    info: Optional[InfoModel] = None,
    *,
    agent: int = 0,
) -> StrategyState:
    params = params or StrategyParams()
    kind = StrategyKind(kind)
    if kind is StrategyKind.ZI:
        return ZiState()
    if kind is StrategyKind.ZIP:
        return ZipState(margin_buy=params.margin_init, margin_sell=params.margin_init, beta=params.zip_beta)
    if kind is StrategyKind.CP:
        return CpState(margin=params.margin_init, beta=params.cp_beta)
    if kind is StrategyKind.GD:
        return GdState(window=params.gd_window)
    if kind is StrategyKind.DP:
        model = info or InfoModel()
        return DpState(
            info=model,
            reliability=model.reliability_for(agent),
            grid_size=params.dp_grid,
        )
    return CeState()


# Decision rules --------------------------------------------------------------


def _toward(current: float, target: float, beta: float) -> float:
    updated = current + beta * (target - current)
    return min(max(updated, 0.0), _MAX_MARGIN)


def _decide_zip(state: ZipState, ctx: DecisionContext) -> TradeAction:
    p_hat = ctx.outcome_estimate
    price = ctx.posted_price
    if price < p_hat * (1.0 - state.margin_buy):
        action = TradeAction.BUY
    elif price > p_hat * (1.0 + state.margin_sell):
        action = TradeAction.SELL
    else:
        action = TradeAction.HOLD

    # Margins move toward the values that make the posted price just acceptable.
    state.margin_buy = _toward(state.margin_buy, 1.0 - price / p_hat, state.beta)
    state.margin_sell = _toward(state.margin_sell, price / p_hat - 1.0, state.beta)
    return action


def _decide_cp(state: CpState, ctx: DecisionContext) -> TradeAction:
    p_hat = ctx.outcome_estimate
    price = ctx.posted_price
    if price < p_hat * (1.0 - state.margin):
        action = TradeAction.BUY
    elif price > p_hat * (1.0 + state.margin):
        action = TradeAction.SELL
    else:
        action = TradeAction.HOLD

    # The target keeps the limit just beyond the latest move of the price
    # trajectory and of the agent's own estimate.
    price_move = 0.0 if state.last_price is None else abs(price - state.last_price)
    belief_move = 0.0 if state.last_estimate is None else abs(p_hat - state.last_estimate)
    state.margin = _toward(state.margin, (price_move + belief_move) / p_hat, state.beta)
    state.last_price = price
    state.last_estimate = p_hat
    return action


def _decide_gd(state: GdState, ctx: DecisionContext) -> TradeAction:
    p_hat = ctx.outcome_estimate
    price = ctx.posted_price
    history = np.asarray(state.prices, dtype=float)
    if history.size:
        # A buy at `price` looks good when past prices were at least as high.
        buy_freq = float(np.mean(history >= price))
        sell_freq = float(np.mean(history <= price))
    else:
        buy_freq = sell_freq = 0.5

    expected_buy = buy_freq * (p_hat - price)
    expected_sell = sell_freq * (price - p_hat)

    state.prices.append(price)
    if state.window is not None and len(state.prices) > state.window:
        del state.prices[: len(state.prices) - state.window]

    if expected_buy <= 0.0 and expected_sell <= 0.0:
        return TradeAction.HOLD
    return TradeAction.BUY if expected_buy > expected_sell else TradeAction.SELL


def _signal_kernel(grid: np.ndarray, info: InfoModel, rho: float) -> Tuple[np.ndarray, np.ndarray]:
    """Signal probabilities and posterior grid values for each belief point.

    Returns ``(probs, posteriors)`` shaped ``(3, G)`` for signals (-1, 0, +1).
    """

    arrive = 1.0 - math.exp(-info.rate)
    pp = info.positive_prob
    like_pos = grid * pp + (1.0 - grid) * (1.0 - pp)
    like_neg = grid * (1.0 - pp) + (1.0 - grid) * pp

    probs = np.vstack([
        arrive * rho * like_neg,
        np.full(grid.size, 1.0 - arrive * rho),
        arrive * rho * like_pos,
    ])
    with np.errstate(invalid="ignore", divide="ignore"):
        post_neg = np.where(like_neg > 0.0, grid * (1.0 - pp) / like_neg, grid)
        post_pos = np.where(like_pos > 0.0, grid * pp / like_pos, grid)
    posteriors = np.vstack([post_neg, grid, post_pos])
    return probs, posteriors


def dp_action_values(state: DpState, ctx: DecisionContext) -> np.ndarray:
    """Action values (sell, hold, buy) at the current offset and estimate.

    Finite-horizon value iteration over (own inventory offset, outcome belief
    on a grid). Rewards are the single-agent LMSR trade values in money, like
    the other baselines: the agent's risk attitude only enters its measured
    utility. The belief moves with the Bayesian update of the next signal.
    """

    horizon = ctx.remaining
    if horizon < 1:
        raise ValueError("Aucune période restante")
    grid = np.linspace(0.0, 1.0, state.grid_size)
    probs, posteriors = _signal_kernel(grid, state.info, state.reliability)

    offsets = np.arange(-horizon, horizon + 1)
    q = np.asarray(ctx.quantities, dtype=float)
    sec = ctx.traded_security
    buy_cost = np.empty(offsets.size)
    sell_gain = np.empty(offsets.size)
    for j, k in enumerate(offsets):
        shifted = q.copy()
        shifted[sec] += k
        buy_cost[j] = buy_payment(shifted, sec, 1.0, ctx.liquidity)
        sell_gain[j] = sell_payout(shifted, sec, 1.0, ctx.liquidity)

    # rewards[a, k, g]
    rewards = np.stack([
        sell_gain[:, None] - grid[None, :],
        np.zeros((offsets.size, grid.size)),
        grid[None, :] - buy_cost[:, None],
    ])

    # Linear interpolation of V at each posterior, shared by every offset row.
    step = grid[1] - grid[0]
    lower = np.clip(np.floor(posteriors / step).astype(int), 0, grid.size - 2)
    weight = np.clip(posteriors / step - lower, 0.0, 1.0)

    value = np.zeros((offsets.size, grid.size))
    q_values = np.zeros((3, offsets.size, grid.size))
    for _ in range(horizon):
        # continuation[k, g] = sum_sigma P(sigma | g) V(k, posterior_sigma(g))
        continuation = np.zeros_like(value)
        for sigma in range(3):
            lo, w = lower[sigma], weight[sigma]
            interpolated = value[:, lo] * (1.0 - w) + value[:, lo + 1] * w
            continuation += probs[sigma][None, :] * interpolated
        for a_idx, action in enumerate(ACTION_ORDER):
            moved = np.clip(np.arange(offsets.size) + int(action), 0, offsets.size - 1)
            q_values[a_idx] = rewards[a_idx] + continuation[moved]
        value = q_values.max(axis=0)

    centre = horizon
    return np.array([
        np.interp(ctx.outcome_estimate, grid, q_values[a_idx, centre]) for a_idx in range(3)
    ])


def _decide_dp(state: DpState, ctx: DecisionContext) -> TradeAction:
    values = dp_action_values(state, ctx)
    hold = values[1]
    best = int(np.argmax(values))
    if values[best] - hold <= _TIE_TOL:
        return TradeAction.HOLD
    return ACTION_ORDER[best]


def decide(
    kind: StrategyKind,
    state: StrategyState,
    context: DecisionContext,
    rng: np.random.Generator,
) -> TradeAction:
    """Order of one agent for the current period."""

    kind = StrategyKind(kind)
    if state.kind is not kind:
        raise ValueError(f"État {state.kind.value} incompatible avec la stratégie {kind.value}")

    if kind is StrategyKind.ZI:
        return TradeAction(int(rng.integers(-1, 2)))
    if kind is StrategyKind.ZIP:
        return _decide_zip(state, context)
    if kind is StrategyKind.CP:
        return _decide_cp(state, context)
    if kind is StrategyKind.GD:
        return _decide_gd(state, context)
    if kind is StrategyKind.DP:
        return _decide_dp(state, context)

    if context.recommendation is None:
        raise ValueError("La stratégie CE requiert une recommandation du médiateur")
    state.followed += 1
    return TradeAction(int(context.recommendation))


def agreement_rate(actions_a: Sequence[int], actions_b: Sequence[int]) -> float:
    """Percentage of periods where both logs hold the same action."""

    if len(actions_a) != len(actions_b):
        raise ValueError(f"Journaux de longueurs différentes: {len(actions_a)} et {len(actions_b)}")
    if not actions_a:
        raise ValueError("Journaux vides")
    matches = sum(int(a) == int(b) for a, b in zip(actions_a, actions_b))
    return 100.0 * matches / len(actions_a)


__all__ = [
    "CeState",
    "CpState",
    "DecisionContext",
    "DpState",
    "GdState",
    "StrategyState",
    "ZiState",
    "ZipState",
    "agreement_rate",
    "decide",
    "dp_action_values",
    "new_strategy_state",
]
