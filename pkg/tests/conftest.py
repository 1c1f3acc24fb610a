"""Shared fixtures: reference games, data paths and small market configs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from posgi_market.models.domain import MarketConfig
from posgi_market.services.equilibrium import NormalFormGame

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("POSGI_SEED", raising=False)


@pytest.fixture
def games_dir() -> Path:
    return DATA_DIR / "games"


@pytest.fixture
def configs_dir() -> Path:
    return DATA_DIR / "configs"


@pytest.fixture
def chicken() -> NormalFormGame:
    return NormalFormGame(
        actions=(("C", "D"), ("C", "D")),
        utilities=np.array([[[6, 6], [2, 7]], [[7, 2], [0, 0]]], dtype=float),
    )


@pytest.fixture
def prisoners_dilemma() -> NormalFormGame:
    return NormalFormGame(
        actions=(("C", "D"), ("C", "D")),
        utilities=np.array([[[3, 3], [0, 5]], [[5, 0], [1, 1]]], dtype=float),
    )


@pytest.fixture
def constant_game() -> NormalFormGame:
    return NormalFormGame(
        actions=(("vendre", "conserver", "acheter"),) * 2,
        utilities=np.ones((3, 3, 2)),
    )


@pytest.fixture
def small_config() -> MarketConfig:
    return MarketConfig(horizon=5)
