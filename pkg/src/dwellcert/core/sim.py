"""Closed-loop simulation of the switched system.

The state is integrated on a fixed grid t_k = k * dt. With builtin dynamics
every RK4 stage evaluates the controller of the active mode at the stage
state; external dynamics are advanced by their flow map with the control
held over the step. Switches take effect at the first grid time at or after
the switching instant, so they are late by less than dt. The disturbance is
sampled at t_k and held over the step.
"""

from __future__ import annotations

import csv
import logging
import math
import typing
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certify import decay_rate, iss_gain, rho
from .constants import DisturbancePolicy, SimulationStatus, SwitchPolicy
from .errors import DwellTimeWarning, ValidationError
from .flowmap import VectorFieldFlowMap
from .integrate import rk4_step

if typing.TYPE_CHECKING:
    from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

    from .box import CompactBox
    from .bundle import CertificateBundle
    from .config import SwitchedSystemSpec
    from .constants import DisturbancePolicyValue, FloatArray, SwitchPolicyValue
    from .flowmap import FlowMapHandle, FlowMaps

logger = logging.getLogger(__name__)

SWITCH_SNAP = 1e-9
"""Relative slack when snapping switching instants to the grid."""


@dataclass(frozen=True)
class SwitchingSignal:
    times: Tuple[float, ...]
    """Switching instants t_1 < t_2 < ..."""
    modes: Tuple[int, ...]
    """p_0, p_1, ...; one more than there are switches"""
    tau_d: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.tau_d) and self.tau_d > 0):
            raise ValidationError(f"tau_d must be positive (got {self.tau_d})")
        if len(self.modes) != len(self.times) + 1:
            raise ValidationError(
                f"{len(self.times)} switches need {len(self.times) + 1} modes "
                f"(got {len(self.modes)})"
            )
        previous = 0.0
        for i, t in enumerate(self.times):
            if t - previous < self.tau_d:
                raise ValidationError(
                    f"switch {i + 1} at t={t} comes {t - previous:.6g} after the "
                    f"previous one, less than the dwell time {self.tau_d}"
                )
            previous = t
        for a, b in zip(self.modes, self.modes[1:]):
            if a == b:
                raise ValidationError(f"consecutive modes must differ (got {a}, {b})")

    def mode_at(self, t: float) -> int:
        index = int(np.searchsorted(np.asarray(self.times), t, side="right"))
        return self.modes[index]


def gen_switching(
    tau_d: float,
    horizon: float,
    modes: Union[int, Sequence[int]],
    policy: Union[SwitchPolicy, SwitchPolicyValue] = SwitchPolicy.ROUND_ROBIN,
    seed: int = 0,
) -> SwitchingSignal:
    """A switching signal on [0, horizon) with every gap at least tau_d.

    ``modes`` is either the mode count l (modes 1..l) or the list of mode
    ids. Round-robin switches at k * tau_d and cycles through the modes. The
    seeded-random policy draws gaps uniformly from [tau_d, 2 tau_d] and the
    next mode uniformly from the other modes.
    """
    ids = list(range(1, modes + 1)) if isinstance(modes, int) else list(modes)
    if len(ids) < 1:
        raise ValidationError("at least one mode is required")
    if not (math.isfinite(tau_d) and tau_d > 0):
        raise ValidationError(f"tau_d must be positive (got {tau_d})")
    if not (math.isfinite(horizon) and horizon > 0):
        raise ValidationError(f"horizon must be positive (got {horizon})")
    policy = SwitchPolicy.parse(policy, "switch_policy")
    if len(ids) == 1:
        return SwitchingSignal((), (ids[0],), tau_d)

    times: List[float] = []
    sequence = [ids[0]]
    if policy == SwitchPolicy.ROUND_ROBIN:
        k = 1
        while k * tau_d < horizon:
            times.append(k * tau_d)
            sequence.append(ids[k % len(ids)])
            k += 1
    else:
        rng = np.random.default_rng(seed)
        t = 0.0
        while True:
            nxt = t + float(rng.uniform(tau_d, 2 * tau_d))
            # Rounding of the sum must not shorten the gap below tau_d.
            while nxt - t < tau_d:
                nxt = float(np.nextafter(nxt, math.inf))
            if nxt >= horizon:
                break
            others = [p for p in ids if p != sequence[-1]]
            times.append(nxt)
            sequence.append(int(others[rng.integers(len(others))]))
            t = nxt
    return SwitchingSignal(tuple(times), tuple(sequence), tau_d)


@dataclass(frozen=True, eq=False)
class DisturbanceSignal:
    """Piecewise-constant disturbance: ``values[i]`` holds on
    [i * hold, (i + 1) * hold); the last value holds forever."""

    policy: DisturbancePolicy
    values: FloatArray
    """(K, r)"""
    hold: float

    def __call__(self, t: float) -> FloatArray:
        index = min(int(t // self.hold), len(self.values) - 1)
        return self.values[max(index, 0)]

    @property
    def sup_norm(self) -> float:
        """max_t |w(t)|"""
        return float(np.max(np.linalg.norm(self.values, axis=1)))


def gen_disturbance(
    dist_box: CompactBox,
    horizon: float,
    policy: Union[DisturbancePolicy, DisturbancePolicyValue] = DisturbancePolicy.ZERO,
    seed: int = 0,
    hold: float = 0.5,
    value: Optional[Sequence[float]] = None,
) -> DisturbanceSignal:
    """A disturbance signal with values in ``dist_box``.

    zero gives w = 0. constant holds ``value`` (default: the upper corner of
    the box). piecewise-constant draws a uniform value of the box for every
    hold interval, reproducibly from ``seed``.
    """
    policy = DisturbancePolicy.parse(policy, "dist_policy")
    if not (math.isfinite(hold) and hold > 0):
        raise ValidationError(f"hold must be positive (got {hold})")
    if policy == DisturbancePolicy.ZERO:
        values = np.zeros((1, dist_box.dim))
    elif policy == DisturbancePolicy.CONSTANT:
        w = dist_box.hi if value is None else np.asarray(value, dtype=float)
        values = np.asarray(w, dtype=float).reshape(1, -1)
    else:
        count = max(1, math.ceil(horizon / hold))
        values = dist_box.uniform(np.random.default_rng(seed), count)
    if values.shape[1] != dist_box.dim:
        raise ValidationError(
            f"disturbance must have dimension {dist_box.dim} (got {values.shape[1]})"
        )
    if not np.all(dist_box.contains(values)):
        raise ValidationError(
            f"{policy} disturbance {values[0].tolist()} is not in {dist_box!r}"
        )
    return DisturbanceSignal(policy, values, float(hold))


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    """Grid time at which the switch took effect"""
    step: int
    from_mode: int
    to_mode: int
    V_before: float
    """V of the old mode at the switching state"""
    V_after: float
    """V of the new mode at the switching state"""

    @property
    def ratio(self) -> float:
        if self.V_before > 0:
            return self.V_after / self.V_before
        return math.inf if self.V_after > 0 else 1.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: FloatArray
    states: FloatArray
    modes: np.ndarray
    disturbances: FloatArray
    controls: FloatArray
    """Control applied at each time (computed at the recorded state)"""
    V: FloatArray
    """V of the active mode"""
    h: FloatArray
    safe: np.ndarray
    """h(x) > 0"""
    status: SimulationStatus = SimulationStatus.COMPLETED
    switches: List[SwitchEvent] = field(default_factory=list)
    dt: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def unsafe_steps(self) -> int:
        return int(np.sum(~self.safe))


def _closed_loop_field(
    bundle: CertificateBundle, mode: int, flow: VectorFieldFlowMap, w: FloatArray
) -> Any:
    wb = w.reshape(1, -1)

    def f(_: float, x: FloatArray) -> FloatArray:
        xb = x.reshape(1, -1)
        return flow.velocity(xb, bundle.control(mode, xb, wb))[0]

    return f


def _advance(
    bundle: CertificateBundle,
    mode: int,
    flow: FlowMapHandle,
    t: float,
    x: FloatArray,
    w: FloatArray,
    u: FloatArray,
    dt: float,
) -> FloatArray:
    if isinstance(flow, VectorFieldFlowMap):
        return rk4_step(_closed_loop_field(bundle, mode, flow, w), t, x, dt)
    return flow.step(x, u, dt)


def simulate_closed_loop(
    spec: SwitchedSystemSpec,
    bundle: CertificateBundle,
    x0: Sequence[float],
    switching: SwitchingSignal,
    disturbance: DisturbanceSignal,
    horizon: float,
    dt: float,
    flows: FlowMaps,
    guard_scale: float = 2.0,
) -> Trajectory:
    """Simulate x' = f_p(x, g_p(x, w)) under ``switching`` and
    ``disturbance`` on [0, horizon].

    The run stops early with status ESCAPED when the state leaves the state
    box scaled by ``guard_scale``, and with NON_FINITE on NaN or inf; the
    trajectory recorded so far is returned.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ValidationError(f"dt must be positive (got {dt})")
    if not (math.isfinite(horizon) and horizon > 0):
        raise ValidationError(f"horizon must be positive (got {horizon})")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != spec.n or not spec.state_box.contains(x):
        raise ValidationError(
            f"x0 = {x.tolist()} must be a point of the state box {spec.state_box!r}"
        )
    unknown = set(switching.modes) - set(bundle.mode_ids)
    if unknown:
        raise ValidationError(f"switching signal uses unknown modes {sorted(unknown)}")

    steps = max(1, int(math.ceil(horizon / dt - SWITCH_SNAP)))
    guard = spec.state_box.scaled(guard_scale)
    switch_steps = [math.ceil(t / dt - SWITCH_SNAP) for t in switching.times]
    next_switch = 0
    mode = switching.modes[0]

    times, states, modes, ws, us, values, events = [], [], [], [], [], [], []
    status = SimulationStatus.COMPLETED
    for k in range(steps + 1):
        t = k * dt
        while next_switch < len(switch_steps) and switch_steps[next_switch] <= k:
            new_mode = switching.modes[next_switch + 1]
            event = SwitchEvent(
                time=t,
                step=k,
                from_mode=mode,
                to_mode=new_mode,
                V_before=float(bundle.V(mode, x)),
                V_after=float(bundle.V(new_mode, x)),
            )
            events.append(event)
            logger.debug("Switch %s -> %s at t=%.6g", mode, new_mode, t)
            mode = new_mode
            next_switch += 1
        w = disturbance(t)
        u = bundle.control(mode, x, w)
        times.append(t)
        states.append(x)
        modes.append(mode)
        ws.append(w)
        us.append(u)
        values.append(float(bundle.V(mode, x)))
        if k == steps:
            break
        x = _advance(bundle, mode, flows[mode], t, x, w, u, dt)
        if not np.all(np.isfinite(x)):
            status = SimulationStatus.NON_FINITE
            logger.warning("State became non-finite at t=%.6g", t + dt)
            break
        if not guard.contains(x):
            status = SimulationStatus.ESCAPED
            logger.warning("State %s left the guard box at t=%.6g", x.tolist(), t + dt)
            times.append(t + dt)
            states.append(x)
            modes.append(mode)
            w = disturbance(t + dt)
            ws.append(w)
            us.append(bundle.control(mode, x, w))
            values.append(float(bundle.V(mode, x)))
            break

    state_array = np.array(states)
    h = np.asarray(bundle.h(state_array), dtype=float)
    trajectory = Trajectory(
        times=np.array(times),
        states=state_array,
        modes=np.array(modes),
        disturbances=np.array(ws),
        controls=np.array(us),
        V=np.array(values),
        h=h,
        safe=h > 0,
        status=status,
        switches=events,
        dt=dt,
    )
    logger.info(
        "Simulated %d steps: %s, %d switches, %d unsafe steps",
        len(trajectory) - 1,
        status,
        len(events),
        trajectory.unsafe_steps,
    )
    return trajectory


def warn_below_dwell(tau_d: float, tau_d_min: Optional[float]) -> bool:
    """Warn with DwellTimeWarning if tau_d does not exceed the certified
    bound. Returns True if it warned."""
    if tau_d_min is None or tau_d > tau_d_min:
        return False
    warnings.warn(
        f"tau_d = {tau_d} does not exceed the certified dwell-time bound "
        f"{tau_d_min:.6g}; ISS is not guaranteed for this run.",
        DwellTimeWarning,
        stacklevel=2,
    )
    return True


@dataclass(frozen=True, eq=False)
class MonitorResult:
    margins: FloatArray
    """bound - V at every recorded step"""
    ok: np.ndarray
    zeta: float
    kappa: float
    tau_d: float
    rho: float
    decay: float
    """lambda"""
    gain: float
    """gamma_0"""
    w_norm: float
    unsafe_steps: int
    max_switch_ratio: Optional[float]

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.ok))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "min_iss_margin": self.min_margin,
            "unsafe_steps": self.unsafe_steps,
            "zeta": self.zeta,
            "kappa": self.kappa,
            "tau_d": self.tau_d,
            "rho": self.rho,
            "lambda": self.decay,
            "gamma0": self.gain,
            "w_norm": self.w_norm,
            "max_switch_ratio": self.max_switch_ratio,
            "switch_ratio_within_zeta": (
                None
                if self.max_switch_ratio is None
                else self.max_switch_ratio <= self.zeta * (1 + 1e-6)
            ),
        }


def monitor_iss_bound(
    trajectory: Trajectory,
    bundle: CertificateBundle,
    zeta: float,
    kappa: float,
    tau_d: float,
) -> MonitorResult:
    """Check V_p(t)(x(t)) <= exp(-lambda t) alpha_2(|x~(0)|) + gamma_0
    sigma(|w|) at every step, with |w| the largest disturbance norm of the
    run. alpha_2 and sigma are the pointwise maxima over the modes.

    Raises
    ------
    ValidationError
        If rho >= 1, that is tau_d is not above the dwell-time bound.
    """
    gain = iss_gain(zeta, kappa, tau_d)
    decay = decay_rate(zeta, kappa, tau_d)
    class_k = [bundle.modes[p].settings.class_k for p in bundle.mode_ids]

    distance0 = float(np.linalg.norm(bundle.shifted(trajectory.states[0])))
    w_norm = float(np.max(np.linalg.norm(trajectory.disturbances, axis=1)))
    initial = max(float(c.alpha2(distance0)) for c in class_k)
    forcing = max(float(c.sigma(w_norm)) for c in class_k)
    bound = np.exp(-decay * trajectory.times) * initial + gain * forcing
    margins = bound - trajectory.V
    ratios = [event.ratio for event in trajectory.switches]
    result = MonitorResult(
        margins=margins,
        ok=margins >= 0,
        zeta=zeta,
        kappa=kappa,
        tau_d=tau_d,
        rho=rho(zeta, kappa, tau_d),
        decay=decay,
        gain=gain,
        w_norm=w_norm,
        unsafe_steps=trajectory.unsafe_steps,
        max_switch_ratio=max(ratios) if ratios else None,
    )
    logger.info(
        "ISS monitor: min margin %.6g, lambda=%.6g, gamma0=%.6g",
        result.min_margin,
        decay,
        gain,
    )
    return result


def write_trajectory(
    trajectory: Trajectory, path: Path, monitor: Optional[MonitorResult] = None
) -> Path:
    """Trajectory CSV, one row per recorded step. ``iss_margin`` is empty
    without a monitor result."""
    n = trajectory.states.shape[1]
    r = trajectory.disturbances.shape[1]
    m = trajectory.controls.shape[1]
    header = (
        ["t"]
        + [f"x{i + 1}" for i in range(n)]
        + ["mode"]
        + [f"w{i + 1}" for i in range(r)]
        + [f"u{i + 1}" for i in range(m)]
        + ["V_active", "h", "iss_margin", "safe"]
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for k in range(len(trajectory)):
            margin = "" if monitor is None else repr(float(monitor.margins[k]))
            writer.writerow(
                [repr(float(trajectory.times[k]))]
                + [repr(float(v)) for v in trajectory.states[k]]
                + [str(int(trajectory.modes[k]))]
                + [repr(float(v)) for v in trajectory.disturbances[k]]
                + [repr(float(v)) for v in trajectory.controls[k]]
                + [
                    repr(float(trajectory.V[k])),
                    repr(float(trajectory.h[k])),
                    margin,
                    str(bool(trajectory.safe[k])).lower(),
                ]
            )
    logger.info("Wrote trajectory %s", path)
    return path


def write_switch_events(events: Sequence[SwitchEvent], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["t", "step", "from_mode", "to_mode", "V_before", "V_after", "ratio"]
        )
        for e in events:
            writer.writerow(
                [
                    repr(e.time),
                    e.step,
                    e.from_mode,
                    e.to_mode,
                    repr(e.V_before),
                    repr(e.V_after),
                    repr(e.ratio),
                ]
            )
    logger.info("Wrote switch events %s", path)
    return path
