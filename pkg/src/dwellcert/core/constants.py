"""Common terms and definitions used in many places"""

from __future__ import annotations

from enum import IntEnum
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .strenum import StrEnum, auto

DWELLCERT_WORKERS = "DWELLCERT_WORKERS"
"""Name of the environment variable setting the number of parallel training
workers (one mode per worker). Defaults to 1."""

ZERO_TOLERANCE = 1e-6
"""Absolute tolerance of the zero-at-reference check |V_p(x*)| <= tol."""

ZETA_FLOOR = 1e-8
"""Relative floor for the comparison-constant estimate. Grid points where
min_p V_p(x) is below ZETA_FLOOR * max V are left out of the ratio."""

MAX_SUBSTEP = 1e-3
"""Longest RK4 substep (seconds) used when a builtin flow map advances by
a longer dt."""

FloatArray = NDArray[np.float64]


class Activation(StrEnum):
    """Activation functions of the hidden layers. All of them are twice
    differentiable, have slope in [0, 1] and a bounded second derivative."""

    TANH = "tanh"
    SOFTPLUS = "softplus"
    SIGMOID = "sigmoid"


ActivationValue = Literal["tanh", "softplus", "sigmoid"]


class SwitchPolicy(StrEnum):
    """How the switching signal of a simulation is generated."""

    ROUND_ROBIN = "round-robin"
    """Switch every tau_d seconds, cycling through the modes in order."""

    RANDOM = "seeded-random"
    """Gaps uniform in [tau_d, 2*tau_d], next mode uniform over the other
    modes."""


SwitchPolicyValue = Literal["round-robin", "seeded-random"]


class DisturbancePolicy(StrEnum):
    ZERO = "zero"
    CONSTANT = "constant"
    PIECEWISE = "piecewise-constant"


DisturbancePolicyValue = Literal["zero", "constant", "piecewise-constant"]


class Condition(StrEnum):
    """The four sampled certificate conditions, in the order they are
    reported."""

    LOWER_BOUND = "lower_bound"
    """c1 = -V(x) + alpha_1(|x - x*|)"""

    UPPER_BOUND = "upper_bound"
    """c2 = V(x) - alpha_2(|x - x*|)"""

    DECREASE = "decrease"
    """c3 = L V(x) + kappa V(x) - sigma(|w|) + delta_V"""

    BARRIER = "barrier"
    """c4 = -L h(x) - mu h(x) + delta_h"""


ConditionValue = Literal["lower_bound", "upper_bound", "decrease", "barrier"]


class TrainStatus(StrEnum):
    CERTIFIED = auto()
    """verify_full passed on the training grid."""

    ISPS = auto()
    """Stopped on a residual loss below the tolerance; practical stability
    only."""

    NO_CERTIFICATE = auto()
    """Ran out of epochs."""

    DIVERGED = auto()
    """Parameters became non-finite; the last finite parameters are kept."""


TrainStatusValue = Literal["CERTIFIED", "ISPS", "NO_CERTIFICATE", "DIVERGED"]


class SimulationStatus(StrEnum):
    COMPLETED = auto()
    ESCAPED = auto()
    """The state left the guard box (state box scaled about its center)."""
    NON_FINITE = auto()


SimulationStatusValue = Literal["COMPLETED", "ESCAPED", "NON_FINITE"]


class FlowKind(StrEnum):
    BUILTIN = "builtin"
    EXTERNAL = "external"


FlowKindValue = Literal["builtin", "external"]


class ExitCode(IntEnum):
    """Exit codes of the command line interface. These are a stable
    contract."""

    OK = 0
    ARGUMENT_ERROR = 2
    """Bad arguments, missing or invalid config, corrupt checkpoint."""
    RESOURCE_ERROR = 3
    """The cover would need more samples than the configured cap."""
    ISPS = 10
    NO_CERTIFICATE = 11
