"""Exception types shared across the package.

Each class maps onto one of the CLI exit codes, so command handlers can
translate failures without inspecting message text.
"""
from __future__ import annotations


class ConfigError(Exception):
    """A configuration value or combination of values is unusable."""


class TrainingDivergedError(RuntimeError):
    """A training loss became non-finite.

    The message names the player and step so the failing update can be
    located in the loss history.
    """

    def __init__(self, message: str, player: str | None = None, step: int | None = None):
        super().__init__(message)
        self.player = player
        self.step = step


class CheckpointError(RuntimeError):
    """A checkpoint file is malformed, truncated, or fails its CRC."""


class IdxFormatError(ValueError):
    """An IDX file violates the format; messages name the byte offset."""
