"""Global settings shared across the simulator and its command line."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

PROJECT_ROOT = Path(__file__).resolve().parents[3]


def _env_int(name: str, default: Optional[int]) -> Optional[int]:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value.strip())
    except ValueError as exc:
        raise ValueError(f"Variable d'environnement {name} invalide: {value!r} (entier attendu)") from exc


@dataclass(slots=True)
class Settings:
    """Encapsulates filesystem paths and runtime options."""

    project_root: Path = PROJECT_ROOT
    data_dir: Path = PROJECT_ROOT / "data"
    log_level: str = field(default_factory=lambda: os.getenv("POSGI_LOG_LEVEL", "INFO").upper())

    results_dir: Path = field(init=False)
    games_dir: Path = field(init=False)
    configs_dir: Path = field(init=False)

    def __post_init__(self) -> None:
        results_env = os.getenv("POSGI_RESULTS_DIR")
        self.results_dir = Path(results_env) if results_env else self.data_dir / "results"

        games_env = os.getenv("POSGI_GAMES_DIR")
        self.games_dir = Path(games_env) if games_env else self.data_dir / "games"
        self.configs_dir = self.data_dir / "configs"

    # Environment overrides are read lazily so a bad value surfaces as a
    # validation error of the command being run, not as an import failure.
    @property
    def seed_override(self) -> Optional[int]:
        return _env_int("POSGI_SEED", None)

    @property
    def default_workers(self) -> int:
        workers = _env_int("POSGI_WORKERS", 1) or 1
        if workers < 1:
            raise ValueError("POSGI_WORKERS doit être >= 1")
        return workers

    @property
    def default_runs(self) -> int:
        runs = _env_int("POSGI_RUNS", 100) or 100
        if runs < 1:
            raise ValueError("POSGI_RUNS doit être >= 1")
        return runs


settings = Settings()

__all__ = ["PROJECT_ROOT", "Settings", "settings"]
