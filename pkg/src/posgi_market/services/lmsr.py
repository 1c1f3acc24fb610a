"""Logarithmic market scoring rule (LMSR) market maker.

Quantities are real-valued share counts per security; every price and payment
derives from the cost function ``C(q) = b * ln(sum_j exp(q_j / b))``, which is
always evaluated with the log-sum-exp shift.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, Hashable, Mapping, Optional, Sequence

import numpy as np

from ..core.errors import NumericDomainError

logger = logging.getLogger(__name__)

# Prices stay inside the open interval even when exp() underflows.
_PRICE_FLOOR = float(np.finfo(float).tiny)
_PRICE_CEIL = float(np.nextafter(1.0, 0.0))
# expm1 overflows past ~709; beyond that the cost difference is used directly.
_EXPM1_LIMIT = 700.0


def as_quantities(q: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate a quantity vector and return it as a float array."""

    arr = np.asarray(q, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"Vecteur de quantités invalide (au moins deux titres): {q!r}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"Quantités non finies: {q!r}")
    return arr


def check_liquidity(b: float) -> float:
    value = float(b)
    if not (math.isfinite(value) and value > 0.0):
        raise ValueError(f"Le paramètre de liquidité b doit être > 0: {b!r}")
    return value


def _check_security(q: np.ndarray, security: int) -> int:
    idx = int(security)
    if not 0 <= idx < q.size:
        raise ValueError(f"Indice de titre invalide: {security} (|Ξ| = {q.size})")
    return idx


def _check_delta(delta: float) -> float:
    value = float(delta)
    if not (math.isfinite(value) and value > 0.0):
        raise ValueError(f"La quantité échangée doit être > 0: {delta!r}")
    return value


def _scaled(q: np.ndarray, b: float) -> np.ndarray:
    scaled = q / b
    if not np.all(np.isfinite(scaled)):
        raise NumericDomainError(f"q/b hors du domaine numérique (b={b})")
    return scaled


def _softmax(q: np.ndarray, b: float) -> np.ndarray:
    scaled = _scaled(q, b)
    weights = np.exp(scaled - scaled.max())
    return weights / weights.sum()


def cost(q: Sequence[float] | np.ndarray, b: float) -> float:
    """Total money wagered: ``b * ln(sum_j exp(q_j / b))``."""

    quantities = as_quantities(q)
    liquidity = check_liquidity(b)
    scaled = _scaled(quantities, liquidity)
    shift = float(scaled.max())
    value = liquidity * (shift + math.log(float(np.exp(scaled - shift).sum())))
    if not math.isfinite(value):
        raise NumericDomainError(f"Coût non fini pour q={q!r}, b={b}")
    return value


def price(q: Sequence[float] | np.ndarray, b: float) -> np.ndarray:
    """Instantaneous prices, the softmax of ``q / b`` (gradient of ``cost``)."""

    quantities = as_quantities(q)
    liquidity = check_liquidity(b)
    return np.clip(_softmax(quantities, liquidity), _PRICE_FLOOR, _PRICE_CEIL)


def price_rows(Q: np.ndarray, b: float) -> np.ndarray:
    """Row-wise ``price`` for a matrix of quantity vectors."""

    matrix = np.asarray(Q, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] < 2 or not np.all(np.isfinite(matrix)):
        raise ValueError(f"Matrice de quantités invalide: {matrix.shape}")
    liquidity = check_liquidity(b)
    scaled = _scaled(matrix, liquidity)
    weights = np.exp(scaled - scaled.max(axis=1, keepdims=True))
    return np.clip(weights / weights.sum(axis=1, keepdims=True), _PRICE_FLOOR, _PRICE_CEIL)


def buy_payment(q: Sequence[float] | np.ndarray, security: int, delta: float, b: float) -> float:
    """Payment ``C(q + delta * e_security) - C(q)`` for buying ``delta`` shares."""

    quantities = as_quantities(q)
    idx = _check_security(quantities, security)
    amount = _check_delta(delta)
    liquidity = check_liquidity(b)

    share = float(_softmax(quantities, liquidity)[idx])
    ratio = amount / liquidity
    if ratio < _EXPM1_LIMIT and share > 0.0:
        # C(q + d e_k) - C(q) = b * ln(1 + p_k * (exp(d / b) - 1))
        return liquidity * math.log1p(share * math.expm1(ratio))

    shifted = quantities.copy()
    shifted[idx] += amount
    return cost(shifted, liquidity) - cost(quantities, liquidity)


def sell_payout(q: Sequence[float] | np.ndarray, security: int, delta: float, b: float) -> float:
    """Payout ``C(q) - C(q - delta * e_security)`` for selling ``delta`` shares."""

    quantities = as_quantities(q)
    idx = _check_security(quantities, security)
    amount = _check_delta(delta)
    liquidity = check_liquidity(b)

    share = float(_softmax(quantities, liquidity)[idx])
    if share > 0.0:
        return -liquidity * math.log1p(share * math.expm1(-amount / liquidity))

    shifted = quantities.copy()
    shifted[idx] -= amount
    return cost(quantities, liquidity) - cost(shifted, liquidity)


def joint_trade_payments(
    q: Sequence[float] | np.ndarray,
    security: int,
    actions: Sequence[int],
    b: float,
) -> np.ndarray:
    """Per-agent payments for simultaneous unit orders on one security.

    Each agent pays the marginal cost of its own unit averaged over every
    arrival order of the agents (the Shapley value of the cost increment), so
    the payments of one joint trade sum to ``C(q') - C(q)`` and nobody gains
    from being first. Negative payments are payouts received by sellers.
    """

    quantities = as_quantities(q)
    idx = _check_security(quantities, security)
    liquidity = check_liquidity(b)

    units = [int(a) for a in actions]
    for unit in units:
        if unit not in (-1, 0, 1):
            raise ValueError(f"Ordre invalide: {unit} (attendu -1, 0 ou +1)")

    n = len(units)
    payments = np.zeros(n, dtype=float)
    marginal_cache: Dict[tuple[int, int], float] = {}

    def marginal(offset: int, unit: int) -> float:
        key = (offset, unit)
        if key not in marginal_cache:
            base = quantities.copy()
            base[idx] += offset
            if unit > 0:
                marginal_cache[key] = buy_payment(base, idx, 1.0, liquidity)
            else:
                marginal_cache[key] = -sell_payout(base, idx, 1.0, liquidity)
        return marginal_cache[key]

    for agent, unit in enumerate(units):
        if unit == 0:
            continue
        others = units[:agent] + units[agent + 1:]
        plus = others.count(1)
        minus = others.count(-1)
        zeros = len(others) - plus - minus

        total = 0.0
        for n_plus in range(plus + 1):
            for n_minus in range(minus + 1):
                ways = math.comb(plus, n_plus) * math.comb(minus, n_minus)
                # s!(n-1-s)!/n! = 1 / (n * C(n-1, s)) for a predecessor set of size s
                weight = sum(
                    math.comb(zeros, n_zero) / (n * math.comb(n - 1, n_plus + n_minus + n_zero))
                    for n_zero in range(zeros + 1)
                )
                total += ways * weight * marginal(n_plus - n_minus, unit)
        payments[agent] = total

    return payments


def settle(holdings: Mapping[Hashable, Sequence[float]], outcome: int) -> Dict[Hashable, float]:
    """Pay $1 per share of the realized security; short positions pay back."""

    payouts: Dict[Hashable, float] = {}
    for agent, shares in holdings.items():
        vector = np.asarray(shares, dtype=float)
        if isinstance(outcome, bool) or not 0 <= int(outcome) < vector.size:
            raise ValueError(f"Issue invalide: {outcome!r} pour {vector.size} titres")
        payouts[agent] = float(vector[int(outcome)])
    return payouts


class LmsrMarketMaker:
    """Stateful market maker keeping the cash and share ledger of a run."""

    def __init__(
        self,
        initial_q: Sequence[float],
        liquidity: float,
        n_agents: int,
        *,
        inventory_floor: Optional[float] = None,
    ) -> None:
        if n_agents < 1:
            raise ValueError("Au moins un agent est requis")
        self.initial_q = as_quantities(initial_q).copy()
        self.quantities = self.initial_q.copy()
        self.liquidity = check_liquidity(liquidity)
        self.inventory_floor = inventory_floor
        self.holdings = np.zeros((n_agents, self.quantities.size), dtype=float)
        self.agent_cash = np.zeros(n_agents, dtype=float)
        self.collected = 0.0
        self.paid_out = 0.0

    @property
    def n_securities(self) -> int:
        return int(self.quantities.size)

    @property
    def worst_case_loss(self) -> float:
        return self.liquidity * math.log(self.n_securities)

    @property
    def loss(self) -> float:
        """Payouts minus collected payments (positive means the maker lost)."""

        return self.paid_out - self.collected

    def prices(self) -> np.ndarray:
        return price(self.quantities, self.liquidity)

    def allows(self, agent: int, security: int, action: int) -> bool:
        """Whether the inventory floor lets ``agent`` place ``action``."""

        if action >= 0 or self.inventory_floor is None:
            return True
        return self.holdings[agent, security] + action >= self.inventory_floor

    def execute(self, security: int, actions: Sequence[int]) -> np.ndarray:
        """Apply one joint trade and return the payment of every agent."""

        if len(actions) != self.holdings.shape[0]:
            raise ValueError("Un ordre par agent est requis")
        payments = joint_trade_payments(self.quantities, security, actions, self.liquidity)
        units = np.asarray([int(a) for a in actions], dtype=float)

        self.quantities[security] += units.sum()
        self.holdings[:, security] += units
        self.agent_cash -= payments
        self.collected += float(payments.sum())
        return payments

    def settle(self, outcome: int) -> np.ndarray:
        ledger = {agent: row for agent, row in enumerate(self.holdings)}
        payouts = settle(ledger, outcome)
        values = np.asarray([payouts[agent] for agent in range(len(ledger))], dtype=float)
        self.paid_out += float(values.sum())
        logger.debug("Règlement de l'issue %s: versements %s", outcome, values)
        return values


__all__ = [
    "LmsrMarketMaker",
    "as_quantities",
    "buy_payment",
    "check_liquidity",
    "cost",
    "joint_trade_payments",
    "price",
    "price_rows",
    "sell_payout",
    "settle",
]
