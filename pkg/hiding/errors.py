"""
Exception hierarchy for the information-hiding lab.
Library code raises these; the harness CLI catches HidingLabError at its
outer boundary and turns it into a diagnostic plus a non-zero exit status.
"""

from typing import Optional, Tuple


class HidingLabError(Exception):
    """Base class for every error raised by the lab."""


class InvalidParameterError(HidingLabError, ValueError):
    """A precondition on an operation's inputs was violated."""


class DegenerateChannelError(InvalidParameterError):
    """The watermark channel carries no usable energy (V_i = 0 or all gamma*alpha = 0)."""


class ConfigError(HidingLabError, ValueError):
    """Malformed configuration, unknown keys, or unreadable input files."""


class InfeasibleBudgetError(HidingLabError):
    """A distortion budget cannot be bracketed over the multiplier scan interval."""

    def __init__(self,
                 message: str,
                 multiplier: str,
                 achievable: Optional[Tuple[float, float]] = None,
                 target: Optional[float] = None):
        super().__init__(message)
        self.multiplier = multiplier
        self.achievable = achievable
        self.target = target
