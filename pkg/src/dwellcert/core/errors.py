"""Exceptions and warnings raised by dwellcert.

Every error carries enough context in its message to locate the cause (the
config key, the field, the raw protocol line or the offending sample)."""

from __future__ import annotations

import typing

if typing.TYPE_CHECKING:
    from typing import Optional


class ValidationError(ValueError):
    """An invariant of a domain type is violated. The message names the
    field."""


class ConfigError(ValueError):
    """The config file is missing, unreadable, or lacks a required key. The
    message names the dotted key, like ``modes.2.kappa``."""


class CheckpointError(ValueError):
    """A checkpoint file is corrupt, has an unknown format, or does not
    match the config it is used with."""


class SampleCapError(RuntimeError):
    """Covering a box would need more samples than allowed."""

    def __init__(self, required: int, cap: int, what: str = "box") -> None:
        self.required = required
        self.cap = cap
        super().__init__(
            f"Covering the {what} requires {required} samples, which exceeds the "
            f"sample cap ({cap}). Increase the cover radius or the cap."
        )


class FlowProtocolError(RuntimeError):
    """The external dynamics process sent something that does not follow
    the line protocol."""

    def __init__(self, message: str, line: Optional[str] = None) -> None:
        self.line = line
        if line is not None:
            message = f"{message} (raw line: {line!r})"
        super().__init__(message)


class FlowTransportError(RuntimeError):
    """The external dynamics process could not be reached: it exited, the
    pipe broke, or it did not answer within the timeout."""


class NonFiniteStateError(ArithmeticError):
    """A flow map returned NaN or infinite state values."""


class NonFiniteLossError(ArithmeticError):
    """The training loss became NaN or infinite."""

    def __init__(self, message: str, sample_index: Optional[int] = None) -> None:
        self.sample_index = sample_index
        super().__init__(message)


class DegenerateCandidateError(RuntimeError):
    """Every grid point is below the floor used for estimating the
    comparison constant zeta."""


class SystemRegistryError(RuntimeError):
    """Any error which is related to the dynamics registry"""


class EmpiricalConstantsWarning(UserWarning):
    """The system constants L_x, L_u or M_f were estimated from samples
    instead of being asserted; certificates built on them are only
    empirically grounded."""


class LooseCertificateWarning(UserWarning):
    """Power iteration did not converge and a Frobenius norm was used as
    the spectral norm bound."""


class DwellTimeWarning(UserWarning):
    """A simulation uses a dwell time below the certified lower bound."""
