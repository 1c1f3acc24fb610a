"""Command-line surface of the simulator."""

from .commands import main

__all__ = ["main"]
