"""Flow maps: the only way the rest of dwellcert touches the dynamics.

A flow map handle advances one mode of the plant by dt with the input held
constant (zero-order hold): x(t + dt) = Phi_p(x(t), u, dt). Builtin dynamics
are integrated in-process with RK4; external dynamics live in a subprocess
(see dwellcert.flow_adapters.process).
"""

from __future__ import annotations

import logging
import typing
import warnings
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import replace

import numpy as np

from .constants import MAX_SUBSTEP, FlowKind
from .errors import EmpiricalConstantsWarning, ValidationError
from .integrate import rk4_integrate, substep_count

if typing.TYPE_CHECKING:
    from types import TracebackType
    from typing import Dict, Iterator, Optional, Type

    from .config import ModeConstants, SwitchedSystemSpec
    from .constants import FloatArray
    from .dynamics import VectorField

    FlowMaps = Dict[int, "FlowMapHandle"]

logger = logging.getLogger(__name__)


class FlowMapHandle(ABC):
    """Forward simulator of a single mode.

    ``step`` must be deterministic: identical arguments give bit-identical
    states.
    """

    kind: FlowKind

    def __init__(self, mode: int, n: int, m: int) -> None:
        self.mode = mode
        self.n = n
        self.m = m

    def step(self, x: FloatArray, u: FloatArray, dt: float) -> FloatArray:
        """Advance a single state ``x`` (n,) under input ``u`` (m,) by dt."""
        xs = np.asarray(x, dtype=float).reshape(1, -1)
        us = np.asarray(u, dtype=float).reshape(1, -1)
        return self.step_batch(xs, us, dt)[0]

    def step_batch(self, xs: FloatArray, us: FloatArray, dt: float) -> FloatArray:
        """Advance a (B, n) batch of states under (B, m) inputs by dt."""
        if not (np.isfinite(dt) and dt > 0):
            raise ValidationError(f"dt must be positive and finite (got {dt})")
        xs = np.asarray(xs, dtype=float)
        us = np.asarray(us, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.n:
            raise ValidationError(
                f"state must have dimension {self.n} (got shape {xs.shape})"
            )
        if us.shape != (xs.shape[0], self.m):
            raise ValidationError(
                f"input must have shape ({xs.shape[0]}, {self.m}) (got {us.shape})"
            )
        return self._advance(xs, us, float(dt))

    @abstractmethod
    def _advance(self, xs: FloatArray, us: FloatArray, dt: float) -> FloatArray:
        """Advance validated batches. Subclasses implement this."""

    def close(self) -> None:
        """Release resources held by the handle. Safe to call twice."""

    def __enter__(self) -> FlowMapHandle:
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc_value: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> None:
        self.close()

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} mode={self.mode} kind={self.kind}>"


class VectorFieldFlowMap(FlowMapHandle):
    """Flow map of a builtin VectorField, integrated with RK4 substeps no
    longer than ``max_substep``."""

    kind = FlowKind.BUILTIN

    def __init__(
        self, field: VectorField, mode: int, max_substep: float = MAX_SUBSTEP
    ) -> None:
        field.check_mode(mode)
        super().__init__(mode, field.n, field.m)
        self.field = field
        self.max_substep = max_substep

    def velocity(self, xs: FloatArray, us: FloatArray) -> FloatArray:
        """The vector field f_p itself, on (B, n) and (B, m) batches."""
        return self.field.evaluate(self.mode, xs, us)

    def _advance(self, xs: FloatArray, us: FloatArray, dt: float) -> FloatArray:
        steps = substep_count(dt, self.max_substep)
        return rk4_integrate(
            lambda _, x: self.field.evaluate(self.mode, x, us), 0.0, xs, dt, steps
        )


@contextmanager
def open_flow_maps(spec: SwitchedSystemSpec) -> Iterator[FlowMaps]:
    """Create one flow map handle per mode of ``spec`` and close them on
    exit."""
    if spec.dynamics.kind == FlowKind.BUILTIN:
        field = spec.dynamics.build()
        flows: FlowMaps = {p: VectorFieldFlowMap(field, p) for p in spec.modes}
        yield flows
        return

    from dwellcert.flow_adapters.process import ExternalProcess

    assert spec.dynamics.command is not None
    with ExternalProcess(
        spec.dynamics.command,
        n=spec.n,
        m=spec.m,
        modes=len(spec.modes),
        timeout=spec.dynamics.timeout,
    ) as process:
        yield {p: process.flow_map(p) for p in spec.modes}


def estimate_flow_constants(
    flows: FlowMaps,
    states: FloatArray,
    inputs: FloatArray,
    probe: float = 1e-4,
    delta: float = 1e-3,
    safety: float = 1.1,
) -> Dict[int, ModeConstants]:
    """Empirical L_x, L_u and M_f of each mode.

    The vector field is recovered from the flow map as
    f(x, u) ~ (Phi(x, u, probe) - x) / probe, its Jacobians by central
    differences with step ``delta``. The largest observed values over every
    (state, input) pair are multiplied by ``safety``.
    """
    from .config import ModeConstants

    warnings.warn(
        "Estimating L_x, L_u and M_f from samples. Certificates built on these "
        "constants are only empirically grounded.",
        EmpiricalConstantsWarning,
        stacklevel=2,
    )
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    xs = np.repeat(states, len(inputs), axis=0)
    us = np.tile(inputs, (len(states), 1))
    n = xs.shape[1]
    m = us.shape[1]

    constants: Dict[int, ModeConstants] = dict()
    for mode, flow in flows.items():
        f0 = _velocity(flow, xs, us, probe)
        jac_x = np.empty((len(xs), n, n))
        for j, e in enumerate(np.eye(n) * delta):
            plus = _velocity(flow, xs + e, us, probe)
            minus = _velocity(flow, xs - e, us, probe)
            jac_x[:, :, j] = (plus - minus) / (2 * delta)
        jac_u = np.empty((len(xs), n, m))
        for j, e in enumerate(np.eye(m) * delta):
            plus = _velocity(flow, xs, us + e, probe)
            minus = _velocity(flow, xs, us - e, probe)
            jac_u[:, :, j] = (plus - minus) / (2 * delta)

        estimate = ModeConstants(
            L_x=safety * float(np.max(np.linalg.norm(jac_x, ord=2, axis=(1, 2)))),
            L_u=safety * float(np.max(np.linalg.norm(jac_u, ord=2, axis=(1, 2)))),
            M_f=safety * float(np.max(np.linalg.norm(f0, axis=1))),
        )
        logger.warning(
            "Estimated constants for mode %s: L_x=%.6g, L_u=%.6g, M_f=%.6g",
            mode,
            estimate.L_x,
            estimate.L_u,
            estimate.M_f,
        )
        constants[mode] = estimate
    return constants


def with_estimated_constants(
    spec: SwitchedSystemSpec, flows: FlowMaps, points_per_dim: int = 9
) -> SwitchedSystemSpec:
    """Fill in the per-mode constants of ``spec`` that were left out of the
    config by estimating them on a regular grid of the state box and of the
    input box (or [-1, 1]^m when there is no input box)."""
    missing = [p for p in spec.modes if spec.constants.get(p) is None]
    if not missing:
        return spec
    states = _grid(spec.state_box.lo, spec.state_box.hi, points_per_dim)
    if spec.input_box is not None:
        inputs = _grid(spec.input_box.lo, spec.input_box.hi, 3)
    else:
        inputs = _grid(-np.ones(spec.m), np.ones(spec.m), 3)
    estimated = estimate_flow_constants(
        {p: flows[p] for p in missing}, states, inputs
    )
    constants = dict(spec.constants)
    constants.update(estimated)
    return replace(spec, constants=constants)


def _grid(lo: FloatArray, hi: FloatArray, count: int) -> FloatArray:
    axes = [np.linspace(a, b, count) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _velocity(
    flow: FlowMapHandle, xs: FloatArray, us: FloatArray, probe: float
) -> FloatArray:
    return (flow.step_batch(xs, us, probe) - xs) / probe
