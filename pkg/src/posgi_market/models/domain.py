"""Domain models shared between services and the command line."""

from __future__ import annotations

import math
from enum import Enum, IntEnum
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TradeAction(IntEnum):
    """One unit sold, held or bought during a trading period."""

    SELL = -1
    HOLD = 0
    BUY = 1

    @property
    def label(self) -> str:
        return self.name.lower()


class InfoSignal(IntEnum):
    NEGATIVE = -1
    NONE = 0
    POSITIVE = 1


class StrategyKind(str, Enum):
    """Trading strategies compared in the experiments (CLI tokens as values)."""

    ZI = "zi"
    ZIP = "zip"
    CP = "cp"
    GD = "gd"
    DP = "dp"
    CE = "ce"


BASELINE_STRATEGIES: Tuple[StrategyKind, ...] = (
    StrategyKind.ZI,
    StrategyKind.ZIP,
    StrategyKind.CP,
    StrategyKind.GD,
    StrategyKind.DP,
)


class InfoModel(BaseModel):
    """Poisson arrival of {-1, 0, +1} information signals."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rate: float = Field(0.5, ge=0.0)
    positive_prob: float = Field(0.8, ge=0.0, le=1.0)
    reliability: Union[float, Tuple[float, ...]] = 0.9

    @field_validator("rate")
    @classmethod
    def _finite_rate(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("rate doit être fini")
        return value

    @field_validator("reliability")
    @classmethod
    def _check_reliability(cls, value: Union[float, Tuple[float, ...]]) -> Union[float, Tuple[float, ...]]:
        values = value if isinstance(value, tuple) else (value,)
        if not values:
            raise ValueError("reliability vide")
        for rho in values:
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"reliability hors de [0, 1]: {rho}")
        return value

    def reliability_for(self, agent: int) -> float:
        if isinstance(self.reliability, tuple):
            if agent >= len(self.reliability):
                raise ValueError(f"Pas de fiabilité définie pour l'agent {agent}")
            return float(self.reliability[agent])
        return float(self.reliability)


class MarketState(BaseModel):
    """Outstanding quantities at a trading period of an event of duration H."""

    model_config = ConfigDict(frozen=True)

    q: Tuple[float, ...]
    period: int = Field(0, ge=0)
    horizon: int = Field(..., ge=1)

    @field_validator("q")
    @classmethod
    def _check_q(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) < 2:
            raise ValueError("Au moins deux titres sont requis")
        if not all(math.isfinite(v) for v in value):
            raise ValueError(f"Quantités non finies: {value}")
        return value

    @model_validator(mode="after")
    def _check_period(self) -> "MarketState":
        if self.period >= self.horizon:
            raise ValueError(f"Période {self.period} hors de l'horizon {self.horizon}")
        return self


class Observation(BaseModel):
    """Posted price of the traded security plus the private signal."""

    model_config = ConfigDict(frozen=True)

    posted_price: float = Field(..., gt=0.0, lt=1.0)
    signal: InfoSignal = InfoSignal.NONE


class RiskPreference(BaseModel):
    """CRRA risk preference factor; 0 is risk neutral, positive is averse."""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(0.0, gt=-1.0, lt=1.0)

    @property
    def averse(self) -> bool:
        return self.theta > 0.0


class StrategyParams(BaseModel):
    """Adaptation constants of the re-targeted baseline strategies."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    zip_beta: float = Field(0.1, gt=0.0, le=1.0)
    margin_init: float = Field(0.05, ge=0.0, lt=1.0)
    cp_beta: float = Field(0.1, gt=0.0, le=1.0)
    gd_window: Optional[int] = Field(None, ge=1)
    dp_grid: int = Field(51, ge=3)


class MarketConfig(BaseModel):
    """Parameters of one simulated event."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    horizon: int = Field(50, ge=1)
    n_agents: int = Field(2, ge=2)
    liquidity: float = Field(100.0, gt=0.0)
    max_trade: int = Field(1, ge=1, le=1)
    initial_q: Tuple[float, ...] = (0.0, 0.0)
    traded_security: int = Field(0, ge=0, le=1)
    info: InfoModel = Field(default_factory=InfoModel)
    strategies: Tuple[StrategyKind, ...] = (StrategyKind.CE, StrategyKind.CE)
    thetas: Tuple[float, ...] = (0.0, 0.0)
    outcome: Literal[0, 1] = 1
    seed: int = Field(0, ge=0)
    max_units: Optional[int] = Field(None, ge=1)
    clamp: bool = True
    inventory_floor: Optional[float] = None
    signal_shift: float = Field(0.05, ge=0.0, lt=0.5)
    opponent_model: Literal["uniform", "empirical"] = "uniform"
    negative_utility: Literal["principal", "signed"] = "principal"
    ce_solver: Literal["auto", "utilitarian", "pareto", "algorithm"] = "auto"
    dual_epsilon: float = Field(1e-3, gt=0.0)
    dual_max_iterations: int = Field(10_000, ge=1)
    audit_existence: bool = True
    strategy_params: StrategyParams = Field(default_factory=StrategyParams)
    pace_seconds: float = Field(0.0, ge=0.0)

    @field_validator("initial_q")
    @classmethod
    def _check_initial_q(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) != 2:
            raise ValueError("Un événement binaire a exactement deux titres")
        if not all(math.isfinite(v) for v in value):
            raise ValueError(f"Quantités initiales non finies: {value}")
        return value

    @field_validator("thetas")
    @classmethod
    def _check_thetas(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        for theta in value:
            if not -1.0 < theta < 1.0:
                raise ValueError(f"theta hors de ]-1, 1[: {theta}")
        return value

    @model_validator(mode="after")
    def _check_agents(self) -> "MarketConfig":
        if len(self.strategies) != self.n_agents:
            raise ValueError(
                f"{len(self.strategies)} stratégies pour {self.n_agents} agents"
            )
        if len(self.thetas) != self.n_agents:
            raise ValueError(f"{len(self.thetas)} valeurs de theta pour {self.n_agents} agents")
        if isinstance(self.info.reliability, tuple) and len(self.info.reliability) != self.n_agents:
            raise ValueError("reliability doit avoir une valeur par agent")
        if not self.clamp and self.state_bound < self.n_agents * self.horizon:
            raise ValueError(
                "Sans troncature, max_units doit couvrir n_agents * horizon unités"
            )
        return self

    @property
    def state_bound(self) -> int:
        return self.max_units if self.max_units is not None else self.n_agents * self.horizon

    @property
    def realized_security(self) -> int:
        return self.traded_security if self.outcome == 1 else 1 - self.traded_security

    @property
    def preferences(self) -> Tuple[RiskPreference, ...]:
        return tuple(RiskPreference(theta=theta) for theta in self.thetas)

    @property
    def risk_averse(self) -> bool:
        return any(preference.averse for preference in self.preferences)

    def with_overrides(self, **changes: object) -> "MarketConfig":
        """Return a validated copy with some fields replaced."""

        data = self.model_dump()
        data.update(changes)
        return MarketConfig.model_validate(data)


class RunResult(BaseModel):
    """Everything recorded while simulating one event."""

    seed: int
    strategies: List[StrategyKind]
    thetas: List[float]
    outcome: int
    prices: List[float]
    final_q: List[float]
    final_price: float
    actions: List[List[int]]
    signals: List[List[int]]
    rewards: List[List[float]]
    utilities: List[List[float]]
    cumulative_utilities: List[List[float]]
    recommendations: Optional[List[List[int]]] = None
    settlement: List[float]
    holdings: List[List[float]]
    agent_cash: List[float]
    maker_cash: float
    maker_loss: float
    truncation_events: int = 0
    fallback_events: int = 0
    inconsistency_events: int = 0
    existence_failures: int = 0
    config: MarketConfig

    @model_validator(mode="after")
    def _check_prices(self) -> "RunResult":
        if len(self.prices) != self.config.horizon:
            raise ValueError("La série de prix doit couvrir l'horizon")
        if any(not 0.0 < p < 1.0 for p in self.prices):
            raise ValueError("Prix hors de ]0, 1[")
        return self

    def total_utility(self, agent: int) -> float:
        return self.cumulative_utilities[agent][-1]


class StrategySummary(BaseModel):
    strategy: StrategyKind
    runs: int
    mean_utility: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    fce_percent: float = Field(..., ge=0.0, le=100.0)
    final_price_error: float
    mean_final_price: float
    price_gap_percent: Optional[float] = None
    utility_gap_percent: Optional[float] = None


class ExperimentSummary(BaseModel):
    """Aggregated comparison across seeded runs."""

    mode: Literal["agreement", "head-to-head", "custom"] = "custom"
    n_runs: int = Field(..., ge=1)
    seeds: List[int]
    pairings: List[List[StrategyKind]]
    rows: List[StrategySummary]
    reference: StrategySummary
    price_paths: dict[str, List[float]] = Field(default_factory=dict)
    base: MarketConfig


__all__ = [
    "BASELINE_STRATEGIES",
    "ExperimentSummary",
    "InfoModel",
    "InfoSignal",
    "MarketConfig",
    "MarketState",
    "Observation",
    "RiskPreference",
    "RunResult",
    "StrategyKind",
    "StrategyParams",
    "StrategySummary",
    "TradeAction",
]
