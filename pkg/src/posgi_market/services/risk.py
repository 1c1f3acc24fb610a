"""CRRA utility of monetary rewards."""

from __future__ import annotations

import math
from typing import Literal, Sequence

import numpy as np

NegativeMode = Literal["principal", "signed"]


def _check_theta(theta: float) -> float:
    value = float(theta)
    # theta = 1 is the logarithmic limit; simulation configs stay inside ]-1, 1[.
    if not (math.isfinite(value) and -1.0 < value <= 1.0):
        raise ValueError(f"theta hors de ]-1, 1]: {theta!r}")
    return value


def crra(reward: float, theta: float, negative_mode: NegativeMode = "principal") -> float:
    """Map a monetary reward to utils with ``u = R**(1 - theta) / (1 - theta)``.

    ``theta = 0`` is the exact identity. A negative reward has no real power;
    under ``"principal"`` it maps to the real part of the principal complex
    power, ``|R|**(1-theta) * cos(pi * (1-theta)) / (1-theta)``; under
    ``"signed"`` it maps to ``-|R|**(1-theta) / (1-theta)``.

    A zero reward is worth zero utils for every theta, the logarithmic limit
    ``theta = 1`` included, so holding never scores ``-inf``.
    """

    r = float(reward)
    t = _check_theta(theta)
    if not math.isfinite(r):
        raise ValueError(f"Récompense non finie: {reward!r}")
    if negative_mode not in ("principal", "signed"):
        raise ValueError(f"Mode de conversion inconnu: {negative_mode!r}")

    if t == 0.0:
        return r
    if r == 0.0:
        return 0.0
    if t == 1.0:
        return math.log(abs(r))

    exponent = 1.0 - t
    magnitude = abs(r) ** exponent / exponent
    if r > 0.0:
        return magnitude
    if negative_mode == "signed":
        return -magnitude
    return magnitude * math.cos(math.pi * exponent)


def concavity_check(theta: float, grid: Sequence[float]) -> bool:
    """True when second differences of crra over a positive grid are <= 1e-9."""

    values = np.asarray(grid, dtype=float)
    if values.ndim != 1 or values.size < 3:
        raise ValueError("La grille doit contenir au moins trois points")
    if np.any(values <= 0.0) or np.any(np.diff(values) <= 0.0):
        raise ValueError("La grille doit être strictement croissante et positive")
    utilities = np.array([crra(r, theta) for r in values])
    return bool(np.all(np.diff(utilities, 2) <= 1e-9))


__all__ = ["NegativeMode", "concavity_check", "crra"]
