"""This module defines the verification result classes.


Most important classes
----------------------
VerificationReport
    Returned from verify_full. Contains the per-mode results, the margin
    and the dwell-time bound, and tells whether the certificate holds.
ModeVerification
    One level lower than VerificationReport: the result of checking the
    conditions of a single mode.
ConditionResult
    The worst sample of one condition of one mode.
"""

from __future__ import annotations

import math
import typing
from dataclasses import InitVar, dataclass, field
from typing import List, Sequence

from .constants import Condition, ConditionValue
from .errors import ValidationError

if typing.TYPE_CHECKING:
    from typing import Any, Dict, Optional, Tuple, Union

    from .certify import ModeMargins, ZetaEstimate

    JsonNumber = Union[float, str, None]


def json_number(value: Optional[float]) -> JsonNumber:
    """A float for JSON output. Non-finite values become the strings "inf",
    "-inf" and "nan" so the output stays standard JSON."""
    if value is None:
        return None
    if math.isfinite(value):
        return float(value)
    return str(value)


@dataclass(frozen=True)
class ConditionResult:
    """The worst slack of one condition over the grid."""

    condition: Condition
    eta: float
    """The slack must not exceed this margin."""
    worst: Optional[float]
    """Largest slack. None if every sample was excluded from the condition
    (only possible for the conditions near the reference point)."""
    sample_index: Optional[int] = None
    """Index of the worst (x, w) pair in canonical pair order."""
    x: Optional[Tuple[float, ...]] = None
    w: Optional[Tuple[float, ...]] = None
    violations: int = 0
    """Number of pairs whose slack exceeds eta."""
    evaluated: int = 0

    @property
    def passed(self) -> bool:
        return self.worst is None or self.worst <= self.eta

    @property
    def boundary(self) -> bool:
        """The worst slack equals the margin exactly. This still passes."""
        return self.worst is not None and self.worst == self.eta

    def to_dict(self) -> Dict[str, Any]:
        return {
            "condition": str(self.condition),
            "worst": json_number(self.worst),
            "eta": self.eta,
            "passed": self.passed,
            "boundary": self.boundary,
            "sample_index": self.sample_index,
            "x": None if self.x is None else list(self.x),
            "w": None if self.w is None else list(self.w),
            "violations": self.violations,
            "evaluated": self.evaluated,
        }

    def __repr__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.worst is None:
            return f"({status}, {self.condition}, all samples excluded)"
        return (
            f"({status}, {self.condition}, worst={self.worst:.6g} "
            f"at x={list(self.x or ())}, w={list(self.w or ())})"
        )


@dataclass(frozen=True)
class ModeVerification:
    """This class is the result of checking the conditions of one mode."""

    mode: int
    conditions: Tuple[ConditionResult, ...]
    """One result per condition, ordered like Condition."""
    zero_value: float
    """|V_p(x*)|"""
    zero_tolerance: float
    certified: Tuple[float, float, float]
    """Certified (L_L, L_dL, L_C)"""
    targets: Tuple[float, float, float]
    margins: ModeMargins
    kappa: float
    mu: float
    excluded_states: int = 0
    """State samples inside the reference exclusion ball."""
    flagged_pairs: int = 0
    """Pairs whose closed-loop step left the guard box."""

    @property
    def zero_ok(self) -> bool:
        return self.zero_value <= self.zero_tolerance

    @property
    def within_targets(self) -> bool:
        return all(c <= t for c, t in zip(self.certified, self.targets))

    @property
    def passed(self) -> bool:
        return (
            self.zero_ok
            and self.within_targets
            and all(result.passed for result in self.conditions)
        )

    def condition(self, condition: Union[Condition, ConditionValue]) -> ConditionResult:
        for result in self.conditions:
            if result.condition == condition:
                return result
        raise KeyError(condition)

    def worst_gap(self) -> float:
        """max over conditions of (worst slack - eta). Non-positive iff
        every condition holds."""
        gaps = [r.worst - r.eta for r in self.conditions if r.worst is not None]
        return max(gaps, default=-math.inf)

    def failures(self) -> List[str]:
        """Human readable reasons why this mode failed."""
        out = []
        if not self.zero_ok:
            out.append(
                f"|V(x*)| = {self.zero_value:.3g} exceeds the tolerance "
                f"{self.zero_tolerance:.3g}"
            )
        names = ("L_L", "L_dL", "L_C")
        for name, value, target in zip(names, self.certified, self.targets):
            if value > target:
                out.append(
                    f"certified {name} = {value:.6g} exceeds target {target:.6g}"
                )
        out.extend(repr(r) for r in self.conditions if not r.passed)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "kappa": self.kappa,
            "mu": self.mu,
            "zero_value": self.zero_value,
            "zero_tolerance": self.zero_tolerance,
            "certified": dict(zip(("L_L", "L_dL", "L_C"), self.certified)),
            "targets": dict(zip(("L_L", "L_dL", "L_C"), self.targets)),
            "excluded_states": self.excluded_states,
            "flagged_pairs": self.flagged_pairs,
            "margins": self.margins.to_dict(),
            "conditions": [r.to_dict() for r in self.conditions],
        }


@dataclass
class VerificationReport:
    """Keeps the per-mode verification results and provides different views
    on them. Reports are created by :func:`verify_full`; one would not
    typically initialize one manually.

    **If you want to**:

    - Check if the certificate holds: See :attr:`success`
    - Get information about a failure in text format: See
      :meth:`get_failure_text`
    - Know more about single modes: See :meth:`query` and :meth:`get`

    Parameters
    ----------
    results:
        The ModeVerification of every checked mode.
    """

    results: InitVar[Optional[List[ModeVerification]]] = None

    eta: float = 0.0
    """The margin every slack is compared against."""
    eps: float = 0.0
    tau: float = 0.0
    exclusion_radius: float = 0.0
    shared_V: bool = False
    zeta: Optional[ZetaEstimate] = None
    tau_d_min: Optional[float] = None
    """ln(zeta) / kappa_min, if zeta was estimated."""
    config_hash: Optional[str] = None

    kappa_min: float = field(init=False)
    """kappa = min_p kappa_p over the checked modes."""

    success: bool = field(init=False)
    """Tells if every checked mode passed.

    See Also
    --------
    failure, get_failure_text
    """

    failure: bool = field(init=False)
    """Always opposite of :attr:`success`."""

    _mode_results: List[ModeVerification] = field(init=False)

    def __post_init__(
        self, results: Optional[List[ModeVerification]] = None
    ) -> None:
        self._mode_results = sorted(results or [], key=lambda r: r.mode)
        if not self._mode_results:
            raise ValidationError("a verification report needs at least one mode")
        self.kappa_min = min(r.kappa for r in self._mode_results)
        self.success = all(r.passed for r in self._mode_results)
        self.failure = not self.success

    @property
    def modes(self) -> List[int]:
        return [r.mode for r in self._mode_results]

    def get(self, mode: int) -> ModeVerification:
        for result in self._mode_results:
            if result.mode == mode:
                return result
        raise KeyError(mode)

    def query(self, passed: Sequence[bool] = (True, False)) -> List[ModeVerification]:
        """The mode results whose pass flag is in ``passed``, ordered by
        mode."""
        return [r for r in self._mode_results if r.passed in passed]

    def worst_gap(self) -> float:
        return max(r.worst_gap() for r in self._mode_results)

    def get_failure_text(self) -> str:
        """Gets information about a failure as text. In case the
        verification was successful, returns an empty string.

        This is only intended for interactive use. The exact format may
        change; for programmatic use see :meth:`query`.
        """
        if self.success:
            return ""
        lines = [f"Verification failed (eta = {self.eta:.6g}, eps = {self.eps:.6g})."]
        for result in self.query(passed=(False,)):
            lines.append(f"Mode {result.mode}:")
            lines.extend(f"  {reason}" for reason in result.failures())
        return "\n".join(lines)

    def summary_lines(self) -> List[str]:
        lines = [
            f"eta = {self.eta:.6g} (eps = {self.eps:.6g}, tau = {self.tau:.6g})",
        ]
        for result in self._mode_results:
            worst = ", ".join(
                f"{r.condition}={json_number(r.worst)}" for r in result.conditions
            )
            status = "PASS" if result.passed else "FAIL"
            lines.append(f"mode {result.mode}: {status} ({worst})")
        if self.zeta is not None:
            lines.append(f"zeta = {self.zeta.value:.6g}, kappa = {self.kappa_min:.6g}")
        if self.tau_d_min is not None:
            lines.append(f"dwell time bound tau_d > {self.tau_d_min:.6f}")
        return lines

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.success,
            "eta": self.eta,
            "eps": self.eps,
            "tau": self.tau,
            "reference_exclusion_radius": self.exclusion_radius,
            "shared_V": self.shared_V,
            "kappa_min": self.kappa_min,
            "zeta": None if self.zeta is None else self.zeta.to_dict(),
            "tau_d_min": self.tau_d_min,
            "config_hash": self.config_hash,
            "modes": [r.to_dict() for r in self._mode_results],
        }
