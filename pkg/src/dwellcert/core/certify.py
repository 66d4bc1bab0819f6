"""Certification mathematics.

Every condition is evaluated on the sampled grid and compared against the
margin eta = -max_p L_p * eps, where L_p is a Lipschitz constant of the
condition over the compact sets. If every sampled slack is at most eta, the
condition holds on the whole box.

Conditions, in shifted coordinates x~ = x - x*:

    c1 = -V_p(x) + k1 |x~|^gamma1
    c2 =  V_p(x) - k2 |x~|^gamma2
    c3 =  LV_p(x, w) + kappa_p V_p(x) - kw |w|^gammaw + delta_V
    c4 = -Lh(x, w) - mu_p h(x) + delta_h

where LV and Lh are difference quotients over one closed-loop step of
length tau. Non-finite slacks count as +inf.
"""

from __future__ import annotations

import logging
import math
import typing
from dataclasses import asdict, dataclass

import numpy as np

from .classk import class_k_lipschitz
from .constants import ZERO_TOLERANCE, ZETA_FLOOR, Condition
from .errors import DegenerateCandidateError, ValidationError
from .flowmap import VectorFieldFlowMap
from .report import ConditionResult, ModeVerification, VerificationReport

if typing.TYPE_CHECKING:
    from typing import Any, Callable, Dict, Iterable, Optional, Tuple

    from .box import CompactBox
    from .bundle import CertificateBundle
    from .config import ModeConstants, SwitchedSystemSpec
    from .constants import FloatArray
    from .cover import SampleSet
    from .flowmap import FlowMapHandle, FlowMaps

logger = logging.getLogger(__name__)

EVALUATION_CHUNK = 65_536
"""(x, w) pairs per closed-loop batch when evaluating a grid."""


@dataclass(frozen=True)
class ModeMargins:
    """Lipschitz constants of the conditions of one mode and the errors of
    the difference-quotient Lie derivatives."""

    mode: int
    constants: ModeConstants
    M_L: float
    """Bound on |grad V_p| used in L_Vx"""
    L_Vx: float
    L_Vu: float
    L_hx: float
    L_hu: float
    delta_V: float
    delta_h: float
    L1: float
    """Lipschitz constant of alpha_1 on [0, R]"""
    L2: float
    """Lipschitz constant of alpha_2 on [0, R]"""
    Lu: float
    """Lipschitz constant of sigma on [0, R_w]"""
    composite: float
    """L_p, the largest Lipschitz constant of the four conditions."""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ValidityMargins:
    modes: Dict[int, ModeMargins]
    tau: float
    eps_x: float
    eps_u: float
    exclusion_radius: float = 0.0
    """c1..c3 skip state samples with |x~| < exclusion_radius - eps_x."""

    @property
    def eps(self) -> float:
        return max(self.eps_x, self.eps_u)

    @property
    def composite(self) -> float:
        return max(m.composite for m in self.modes.values())

    @property
    def eta(self) -> float:
        return -self.composite * self.eps

    def included(self, distances: FloatArray) -> np.ndarray:
        """Which state samples (given by |x~|) are subject to c1..c3."""
        return np.asarray(distances) >= self.exclusion_radius - self.eps_x

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": self.tau,
            "eps_x": self.eps_x,
            "eps_u": self.eps_u,
            "eta": self.eta,
            "reference_exclusion_radius": self.exclusion_radius,
            "modes": {str(p): m.to_dict() for p, m in self.modes.items()},
        }


def compute_margins(
    spec: SwitchedSystemSpec,
    bundle: CertificateBundle,
    sample_set: SampleSet,
    tau: float,
    exclusion_radius: float = 0.0,
) -> ValidityMargins:
    """Composite Lipschitz constants and Lie errors of every mode of
    ``bundle``, from the asserted system constants, the Lipschitz targets and
    the barrier.

    Raises
    ------
    ValidationError
        If tau or the exclusion radius is invalid, or constants of a mode are
        missing.
    """
    if not (np.isfinite(tau) and tau > 0):
        raise ValidationError(f"tau must be positive (got {tau})")
    if exclusion_radius < 0:
        raise ValidationError(
            f"reference_exclusion_radius must be >= 0 (got {exclusion_radius})"
        )
    radius = spec.state_box.radius_from(bundle.reference_point)
    dist_radius = spec.dist_box.norm_bound()
    barrier = bundle.barrier
    M_h, L_h, L_dh = barrier.gradient_bound, barrier.lipschitz, barrier.smoothness

    margins = dict()
    for mode in bundle.mode_ids:
        settings = bundle.modes[mode].settings
        c = spec.constants_for(mode)
        L_L, L_dL, L_C = settings.targets.as_tuple()
        M_L = settings.gradient_bound
        k = settings.class_k

        closed_x = c.L_x + c.L_u * L_C
        L_Vx = M_L * closed_x + c.M_f * L_dL
        L_Vu = M_L * c.L_u * L_C
        L_hx = c.M_f * L_dh + M_h * closed_x
        L_hu = M_h * c.L_u * L_C
        L1 = class_k_lipschitz(k.k1, k.gamma1, radius)
        L2 = class_k_lipschitz(k.k2, k.gamma2, radius)
        Lu = class_k_lipschitz(k.kw, k.gammaw, dist_radius)
        composite = max(
            L_L + L1,
            L_L + L2,
            settings.kappa * L_L + Lu + L_Vx + L_Vu,
            L_hx + settings.mu * L_h + L_hu,
        )
        margins[mode] = ModeMargins(
            mode=mode,
            constants=c,
            M_L=M_L,
            L_Vx=L_Vx,
            L_Vu=L_Vu,
            L_hx=L_hx,
            L_hu=L_hu,
            delta_V=0.5 * tau * L_Vx * c.M_f,
            delta_h=0.5 * tau * L_hx * c.M_f,
            L1=L1,
            L2=L2,
            Lu=Lu,
            composite=composite,
        )
    result = ValidityMargins(
        margins, float(tau), sample_set.eps_x, sample_set.eps_u, exclusion_radius
    )
    logger.info(
        "Margins: L=%.6g, eps=%.6g, eta=%.6g", result.composite, result.eps, result.eta
    )
    return result


def closed_loop_step(
    bundle: CertificateBundle,
    mode: int,
    flow: FlowMapHandle,
    xs: FloatArray,
    ws: FloatArray,
    tau: float,
    substeps: int = 1,
    guard: Optional[CompactBox] = None,
) -> Tuple[FloatArray, np.ndarray]:
    """x(tau) of the closed loop from every state of the batch, with w held
    and u = g_p(x, w) recomputed at each of ``substeps`` substeps.

    Returns the states and a flag per sample that is set if the state left
    ``guard`` or became non-finite on the way.
    """
    dt = tau / substeps
    x = np.asarray(xs, dtype=float)
    flagged = np.zeros(len(x), dtype=bool)
    for _ in range(substeps):
        u = bundle.control(mode, x, ws)
        x = flow.step_batch(x, u, dt)
        left = ~np.all(np.isfinite(x), axis=1)
        if guard is not None:
            left |= ~guard.contains(x)
        flagged |= left
    return x, flagged


@dataclass(frozen=True, eq=False)
class LieBatch:
    lie_V: FloatArray
    lie_h: FloatArray
    x_next: FloatArray
    flagged: np.ndarray


def lie_batch(
    bundle: CertificateBundle,
    mode: int,
    flow: FlowMapHandle,
    xs: FloatArray,
    ws: FloatArray,
    tau: float,
    substeps: int = 1,
    guard: Optional[CompactBox] = None,
) -> LieBatch:
    """Difference quotients (V_p(x(tau)) - V_p(x)) / tau and the same for h,
    for a (B, n) batch of states and (B, r) batch of disturbances."""
    x_next, flagged = closed_loop_step(
        bundle, mode, flow, xs, ws, tau, substeps, guard
    )
    lie_V = (bundle.V(mode, x_next) - bundle.V(mode, xs)) / tau
    lie_h = (bundle.h(x_next) - bundle.h(xs)) / tau
    return LieBatch(lie_V, lie_h, x_next, flagged)


def lie_estimate(
    bundle: CertificateBundle,
    mode: int,
    x: FloatArray,
    w: FloatArray,
    flow: FlowMapHandle,
    tau: float,
    substeps: int = 1,
    guard: Optional[CompactBox] = None,
    function: Optional[Callable[[FloatArray], FloatArray]] = None,
) -> float:
    """Difference-quotient Lie derivative of V_p at a single (x, w).

    ``function`` replaces V_p; it is called with a (1, n) batch and must
    return shape (1,). Pass ``bundle.h`` for the barrier.
    """
    xs = np.asarray(x, dtype=float).reshape(1, -1)
    ws = np.asarray(w, dtype=float).reshape(1, -1)
    x_next, flagged = closed_loop_step(
        bundle, mode, flow, xs, ws, tau, substeps, guard
    )
    if flagged[0]:
        logger.warning(
            "Closed-loop step from x=%s, w=%s left the guard box",
            xs[0].tolist(),
            ws[0].tolist(),
        )
    if function is None:
        before, after = bundle.V(mode, xs), bundle.V(mode, x_next)
    else:
        before, after = function(xs), function(x_next)
    return float((after[0] - before[0]) / tau)


def lie_derivative(
    bundle: CertificateBundle,
    mode: int,
    flow: FlowMapHandle,
    xs: FloatArray,
    ws: FloatArray,
) -> Tuple[FloatArray, FloatArray]:
    """Exact Lie derivatives grad V_p . f and grad h . f of the closed loop.
    Only available for builtin dynamics, where f itself is known."""
    if not isinstance(flow, VectorFieldFlowMap):
        raise ValidationError(
            f"exact Lie derivatives need a builtin vector field (got {flow!r})"
        )
    xs = np.asarray(xs, dtype=float)
    f = flow.velocity(xs, bundle.control(mode, xs, ws))
    lie_V = np.sum(bundle.grad_V(mode, xs) * f, axis=-1)
    lie_h = np.sum(bundle.grad_h(xs) * f, axis=-1)
    return lie_V, lie_h


def condition_slacks(
    bundle: CertificateBundle,
    margins: ValidityMargins,
    mode: int,
    xs: FloatArray,
    ws: FloatArray,
    lie_V: FloatArray,
    lie_h: FloatArray,
    lie_errors: bool = True,
) -> FloatArray:
    """(B, 4) array of c1..c4 for a batch. With ``lie_errors=False`` the
    delta terms are left out, which gives the raw conditions when exact Lie
    derivatives are passed in."""
    cert = bundle.modes[mode]
    k = cert.settings.class_k
    mode_margins = margins.modes[mode]
    xs = np.asarray(xs, dtype=float)
    distance = np.linalg.norm(bundle.shifted(xs), axis=-1)
    w_norm = np.linalg.norm(np.asarray(ws, dtype=float), axis=-1)
    V = bundle.V(mode, xs)
    h = bundle.h(xs)
    delta_V = mode_margins.delta_V if lie_errors else 0.0
    delta_h = mode_margins.delta_h if lie_errors else 0.0

    with np.errstate(invalid="ignore", over="ignore"):
        slacks = np.stack(
            [
                -V + k.alpha1(distance),
                V - k.alpha2(distance),
                lie_V + cert.kappa * V - k.sigma(w_norm) + delta_V,
                -lie_h - cert.mu * h + delta_h,
            ],
            axis=-1,
        )
    return np.where(np.isfinite(slacks), slacks, np.inf)


def check_point(
    bundle: CertificateBundle,
    margins: ValidityMargins,
    mode: int,
    x: FloatArray,
    w: FloatArray,
    lie_V: float,
    lie_h: float,
    lie_errors: bool = True,
) -> Tuple[float, float, float, float]:
    """c1..c4 at a single (x, w). Each must be <= eta."""
    row = condition_slacks(
        bundle,
        margins,
        mode,
        np.asarray(x, dtype=float).reshape(1, -1),
        np.asarray(w, dtype=float).reshape(1, -1),
        np.array([lie_V]),
        np.array([lie_h]),
        lie_errors,
    )[0]
    return (float(row[0]), float(row[1]), float(row[2]), float(row[3]))


@dataclass(frozen=True, eq=False)
class GridEvaluation:
    """Slacks of one mode on every (x, w) pair of a sample set, in canonical
    pair order (disturbance index fastest)."""

    mode: int
    slacks: FloatArray
    """(P, 4)"""
    included: np.ndarray
    """(P,) True if the state is subject to c1..c3"""
    flagged: np.ndarray
    """(P,) True if the closed-loop step left the guard box"""
    state_index: np.ndarray
    dist_index: np.ndarray

    def masked(self) -> FloatArray:
        """The slacks with c1..c3 of excluded pairs set to -inf."""
        out = self.slacks.copy()
        out[~self.included, :3] = -np.inf
        return out

    def worst(self) -> FloatArray:
        """(4,) worst slack per condition (-inf if nothing was evaluated)."""
        if len(self.slacks) == 0:
            return np.full(4, -np.inf)
        return self.masked().max(axis=0)

    def worst_gap(self, eta: float) -> float:
        """max over conditions of (worst slack - eta)."""
        return float(np.max(self.worst()) - eta)


def evaluate_grid(
    bundle: CertificateBundle,
    margins: ValidityMargins,
    sample_set: SampleSet,
    flows: FlowMaps,
    lie_substeps: int = 1,
    guard: Optional[CompactBox] = None,
    modes: Optional[Iterable[int]] = None,
    chunk: int = EVALUATION_CHUNK,
) -> Dict[int, GridEvaluation]:
    """c1..c4 on every (x, w) pair of ``sample_set`` for every mode."""
    state_index, dist_index = sample_set.pair_indices()
    distances = np.linalg.norm(bundle.shifted(sample_set.state_samples), axis=1)
    included = margins.included(distances)[state_index]
    total = len(state_index)

    results = dict()
    for mode in bundle.mode_ids if modes is None else modes:
        slacks = np.empty((total, 4))
        flagged = np.zeros(total, dtype=bool)
        for start in range(0, total, chunk):
            part = slice(start, start + chunk)
            xs = sample_set.state_samples[state_index[part]]
            ws = sample_set.dist_samples[dist_index[part]]
            lie = lie_batch(
                bundle, mode, flows[mode], xs, ws, margins.tau, lie_substeps, guard
            )
            slacks[part] = condition_slacks(
                bundle, margins, mode, xs, ws, lie.lie_V, lie.lie_h
            )
            flagged[part] = lie.flagged
        results[mode] = GridEvaluation(
            mode, slacks, included, flagged, state_index, dist_index
        )
        logger.debug(
            "Mode %s: evaluated %d pairs, %d flagged", mode, total, int(flagged.sum())
        )
    return results


def verify_full(
    spec: SwitchedSystemSpec,
    bundle: CertificateBundle,
    margins: ValidityMargins,
    grid: SampleSet,
    flows: FlowMaps,
    lie_substeps: int = 1,
    guard_margin: float = 0.1,
    zero_tolerance: float = ZERO_TOLERANCE,
    modes: Optional[Iterable[int]] = None,
    zeta: Optional[ZetaEstimate] = None,
    config_hash: Optional[str] = None,
    evaluations: Optional[Dict[int, GridEvaluation]] = None,
) -> VerificationReport:
    """Check every condition of every mode on every pair of ``grid``, the
    zero at the reference point and the Lipschitz targets.

    Failures are report content. ``evaluations`` reuses the result of an
    earlier evaluate_grid call on the same bundle and grid.

    Raises
    ------
    ValidationError
        If ``modes`` is empty or the margins were computed for another
        grid radius.
    """
    checked = list(bundle.mode_ids if modes is None else modes)
    if not checked:
        raise ValidationError("verify_full needs at least one mode")
    if (margins.eps_x, margins.eps_u) != (grid.eps_x, grid.eps_u):
        raise ValidationError(
            f"margins were computed for eps=({margins.eps_x}, {margins.eps_u}) "
            f"but the grid has eps=({grid.eps_x}, {grid.eps_u})"
        )
    if evaluations is None:
        evaluations = evaluate_grid(
            bundle,
            margins,
            grid,
            flows,
            lie_substeps=lie_substeps,
            guard=spec.state_box.inflated(guard_margin),
            modes=checked,
        )
    eta = margins.eta
    distances = np.linalg.norm(bundle.shifted(grid.state_samples), axis=1)
    excluded_states = int(np.sum(~margins.included(distances)))

    results = []
    for mode in checked:
        evaluation = evaluations[mode]
        cert = bundle.modes[mode]
        masked = evaluation.masked()
        conditions = []
        for j, condition in enumerate(Condition):
            column = masked[:, j]
            evaluated = int(np.sum(column > -np.inf))
            if evaluated == 0:
                conditions.append(ConditionResult(condition, eta, None))
                continue
            index = int(np.argmax(column))
            conditions.append(
                ConditionResult(
                    condition,
                    eta,
                    float(column[index]),
                    sample_index=index,
                    x=tuple(grid.state_samples[evaluation.state_index[index]]),
                    w=tuple(grid.dist_samples[evaluation.dist_index[index]]),
                    violations=int(np.sum(column > eta)),
                    evaluated=evaluated,
                )
            )
        result = ModeVerification(
            mode=mode,
            conditions=tuple(conditions),
            zero_value=abs(float(bundle.V(mode, bundle.reference_point))),
            zero_tolerance=zero_tolerance,
            certified=cert.certified_constants(),
            targets=cert.settings.targets.as_tuple(),
            margins=margins.modes[mode],
            kappa=cert.kappa,
            mu=cert.mu,
            excluded_states=excluded_states,
            flagged_pairs=int(evaluation.flagged.sum()),
        )
        logger.info(
            "Mode %s %s: worst gap %.6g",
            mode,
            "passed" if result.passed else "failed",
            result.worst_gap(),
        )
        results.append(result)

    kappa = min(bundle.modes[p].kappa for p in checked)
    return VerificationReport(
        results,
        eta=eta,
        eps=margins.eps,
        tau=margins.tau,
        exclusion_radius=margins.exclusion_radius,
        shared_V=bundle.shared_V,
        zeta=zeta,
        tau_d_min=None if zeta is None else dwell_time_min(zeta.value, kappa),
        config_hash=config_hash,
    )


@dataclass(frozen=True)
class ZetaEstimate:
    value: float
    """max over the grid of max_{p, p'} V_p(x) / V_p'(x), at least 1."""
    points: int
    """Grid points used"""
    excluded_floor: int = 0
    """Points where some V_p is below the relative floor"""
    excluded_reference: int = 0
    """Points inside the reference exclusion ball"""
    location: Optional[Tuple[float, ...]] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["location"] = None if self.location is None else list(self.location)
        return data


def estimate_zeta(
    bundle: CertificateBundle,
    grid: FloatArray,
    exclusion_radius: float = 0.0,
    floor: float = ZETA_FLOOR,
) -> ZetaEstimate:
    """Largest ratio between the Lyapunov functions of two modes over a
    (N, n) grid of states.

    Points where min_p V_p is below ``floor`` times the largest value on the
    grid are left out, as are points closer than ``exclusion_radius`` to the
    reference point. With a shared Lyapunov function, or a single mode, zeta
    is 1.

    Raises
    ------
    DegenerateCandidateError
        If every grid point is left out.
    """
    grid = np.asarray(grid, dtype=float)
    if bundle.shared_V or len(bundle.mode_ids) == 1:
        return ZetaEstimate(1.0, len(grid))

    values = np.stack([bundle.V(p, grid) for p in bundle.mode_ids])
    lowest = values.min(axis=0)
    highest = values.max(axis=0)
    scale = float(np.max(highest)) if len(grid) else 0.0
    if scale > 0:
        below = ~(lowest >= floor * scale)
    else:
        below = np.ones(len(grid), dtype=bool)
    distance = np.linalg.norm(bundle.shifted(grid), axis=1)
    near = distance < exclusion_radius
    keep = ~below & ~near
    if not np.any(keep):
        raise DegenerateCandidateError(
            f"Every one of the {len(grid)} grid points has some V_p below the "
            "floor or lies inside the exclusion ball, so zeta is undefined."
        )
    ratio = np.where(keep, highest / np.where(keep, lowest, 1.0), -np.inf)
    index = int(np.argmax(ratio))
    estimate = ZetaEstimate(
        value=max(1.0, float(ratio[index])),
        points=int(keep.sum()),
        excluded_floor=int(np.sum(below)),
        excluded_reference=int(np.sum(near & ~below)),
        location=tuple(float(v) for v in grid[index]),
    )
    logger.info(
        "zeta = %.6g over %d points (%d below floor, %d near x*)",
        estimate.value,
        estimate.points,
        estimate.excluded_floor,
        estimate.excluded_reference,
    )
    return estimate


def _check_dwell_inputs(zeta: float, kappa: float) -> None:
    if not zeta >= 1:
        raise ValidationError(f"zeta must be >= 1 (got {zeta})")
    if not (math.isfinite(kappa) and kappa > 0):
        raise ValidationError(f"kappa must be positive (got {kappa})")


def dwell_time_min(zeta: float, kappa: float) -> float:
    """ln(zeta) / kappa. Any dwell time strictly above it gives ISS of the
    switched closed loop."""
    _check_dwell_inputs(zeta, kappa)
    return math.log(zeta) / kappa


def rho(zeta: float, kappa: float, tau_d: float) -> float:
    """Contraction factor zeta * exp(-kappa * tau_d) over one dwell interval.
    Below 1 iff tau_d exceeds dwell_time_min."""
    _check_dwell_inputs(zeta, kappa)
    if not (math.isfinite(tau_d) and tau_d > 0):
        raise ValidationError(f"tau_d must be positive (got {tau_d})")
    return zeta * math.exp(-kappa * tau_d)


def decay_rate(zeta: float, kappa: float, tau_d: float) -> float:
    """lambda = kappa - ln(zeta) / tau_d"""
    _check_dwell_inputs(zeta, kappa)
    return kappa - math.log(zeta) / tau_d


def iss_gain(zeta: float, kappa: float, tau_d: float) -> float:
    """gamma_0 = (zeta / (1 - rho) + 1) / kappa

    Raises
    ------
    ValidationError
        If rho >= 1, that is tau_d is not above the dwell-time bound.
    """
    factor = rho(zeta, kappa, tau_d)
    if factor >= 1:
        raise ValidationError(
            f"rho = {factor:.6g} >= 1 for tau_d = {tau_d}: choose a dwell time "
            f"larger than {dwell_time_min(zeta, kappa):.6g}"
        )
    return (zeta / (1.0 - factor) + 1.0) / kappa
