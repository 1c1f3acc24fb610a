"""JSON schema of normal-form game files read by ``ce-solve``."""

from __future__ import annotations

import math
from typing import List

from pydantic import BaseModel, Field, model_validator


class GameDocument(BaseModel):
    """``{players, actions: [[names]], utilities: [profile][player]}``.

    Profiles are listed lexicographically over the action lists, the last
    player's action varying fastest.
    """

    players: List[str] = Field(..., min_length=1)
    actions: List[List[str]]
    utilities: List[List[float]]

    @model_validator(mode="after")
    def _check_shape(self) -> "GameDocument":
        if len(self.actions) != len(self.players):
            raise ValueError(f"{len(self.actions)} listes d'actions pour {len(self.players)} joueurs")
        if len(set(self.players)) != len(self.players):
            raise ValueError("Noms de joueurs dupliqués")

        expected = 1
        for player, names in zip(self.players, self.actions):
            if not names:
                raise ValueError(f"Le joueur {player} n'a aucune action")
            if len(set(names)) != len(names):
                raise ValueError(f"Actions dupliquées pour le joueur {player}")
            expected *= len(names)

        if len(self.utilities) != expected:
            raise ValueError(f"{len(self.utilities)} profils d'utilité, {expected} attendus")
        for index, row in enumerate(self.utilities):
            if len(row) != len(self.players):
                raise ValueError(f"Profil {index}: {len(row)} utilités pour {len(self.players)} joueurs")
            if not all(math.isfinite(value) for value in row):
                raise ValueError(f"Profil {index}: utilités non finies")
        return self


__all__ = ["GameDocument"]
