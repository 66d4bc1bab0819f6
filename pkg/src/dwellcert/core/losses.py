"""Training losses and their gradients.

The five sub-losses of a mode, each a hinge against the margin eta:

    L1 = max(0, |V_p(x*)| - zero_tolerance / 2)
    L2 = sum over distinct states of max(0, c1 - eta)
    L3 = sum over distinct states of max(0, c2 - eta)
    L4 = sum over (x, w) pairs of max(0, c3 - eta)
    L5 = sum over (x, w) pairs of max(0, c4 - eta)

L2..L4 skip states inside the reference exclusion ball. The total adds the
Lipschitz penalty of both networks against their targets.

Gradients through V_p are exact. The controller enters c3 and c4 only
through the black-box flow map, so its gradient uses central differences of
Phi_p(x, u, tau) with respect to u, chained with the exact parameter
gradients of the controller.
"""

from __future__ import annotations

import logging
import typing
from dataclasses import dataclass

import numpy as np

from .certify import condition_slacks, lie_batch
from .constants import ZERO_TOLERANCE
from .errors import NonFiniteLossError
from .net import lipschitz_penalty, lipschitz_penalty_gradients, param_gradients

if typing.TYPE_CHECKING:
    from typing import Sequence

    from .bundle import CertificateBundle
    from .certify import GridEvaluation, LieBatch, ValidityMargins
    from .config import TrainConfig
    from .constants import FloatArray
    from .cover import SampleSet
    from .flowmap import FlowMapHandle
    from .net import ParamArrays

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PairBatch:
    """A batch of (x, w) pairs of a sample set."""

    pair_ids: np.ndarray
    """(B,) pair indices in canonical order"""
    state_index: np.ndarray
    xs: FloatArray
    ws: FloatArray
    included: np.ndarray
    """(B,) True if the state is subject to c1..c3"""

    def distinct(self) -> np.ndarray:
        """Batch positions of the first occurrence of every included
        state."""
        _, first = np.unique(self.state_index, return_index=True)
        first = np.sort(first)
        return first[self.included[first]]


def make_batch(
    sample_set: SampleSet, pair_ids: np.ndarray, included_states: np.ndarray
) -> PairBatch:
    """The pairs with the given canonical indices. ``included_states`` flags
    the state samples outside the exclusion ball."""
    pair_ids = np.asarray(pair_ids, dtype=np.int64)
    state_index = pair_ids // sample_set.M
    dist_index = pair_ids % sample_set.M
    return PairBatch(
        pair_ids=pair_ids,
        state_index=state_index,
        xs=sample_set.state_samples[state_index],
        ws=sample_set.dist_samples[dist_index],
        included=included_states[state_index],
    )


@dataclass(frozen=True, eq=False)
class SubLosses:
    values: FloatArray
    """(5,) L1..L5"""
    slacks: FloatArray
    """(B, 4) c1..c4"""
    lie: LieBatch
    zero_value: float
    """V_p(x*)"""
    distinct: np.ndarray


def _zero_loss(zero_value: float, zero_tolerance: float) -> float:
    return max(0.0, abs(zero_value) - 0.5 * zero_tolerance)


def sub_losses(
    bundle: CertificateBundle,
    mode: int,
    batch: PairBatch,
    margins: ValidityMargins,
    flow: FlowMapHandle,
    lie_substeps: int = 1,
    zero_tolerance: float = ZERO_TOLERANCE,
) -> SubLosses:
    """L1..L5 of ``mode`` on ``batch``. Every value is >= 0."""
    lie = lie_batch(
        bundle, mode, flow, batch.xs, batch.ws, margins.tau, lie_substeps
    )
    slacks = condition_slacks(
        bundle, margins, mode, batch.xs, batch.ws, lie.lie_V, lie.lie_h
    )
    gaps = np.maximum(slacks - margins.eta, 0.0)
    distinct = batch.distinct()
    zero_value = float(bundle.V(mode, bundle.reference_point))
    values = np.array(
        [
            _zero_loss(zero_value, zero_tolerance),
            gaps[distinct, 0].sum(),
            gaps[distinct, 1].sum(),
            gaps[batch.included, 2].sum(),
            gaps[:, 3].sum(),
        ]
    )
    return SubLosses(values, slacks, lie, zero_value, distinct)


@dataclass(frozen=True, eq=False)
class BatchLoss:
    sub_losses: FloatArray
    penalty: float
    total: float
    slacks: FloatArray
    lyapunov_grads: ParamArrays
    controller_grads: ParamArrays


def control_sensitivity(
    flow: FlowMapHandle, xs: FloatArray, us: FloatArray, tau: float, step: float
) -> FloatArray:
    """(B, n, m) central-difference estimate of d/du (Phi(x, u, tau) - x) /
    tau, that is the input Jacobian of the one-step vector field."""
    count, m = us.shape
    jac = np.empty((count, flow.n, m))
    for j, e in enumerate(np.eye(m) * step):
        plus = flow.step_batch(xs, us + e, tau)
        minus = flow.step_batch(xs, us - e, tau)
        jac[:, :, j] = (plus - minus) / (2.0 * step * tau)
    return jac


def total_loss(
    bundle: CertificateBundle,
    mode: int,
    batch: PairBatch,
    margins: ValidityMargins,
    flow: FlowMapHandle,
    config: TrainConfig,
    lie_substeps: int = 1,
    zero_tolerance: float = ZERO_TOLERANCE,
) -> BatchLoss:
    """sum_i c_i L_i plus the Lipschitz penalty, with gradients with respect
    to the parameters of V_p and of the controller (ordered like
    MlpParams.arrays()).

    Raises
    ------
    NonFiniteLossError
        If the loss is not finite. Carries the canonical index of the first
        offending pair.
    """
    parts = sub_losses(
        bundle, mode, batch, margins, flow, lie_substeps, zero_tolerance
    )
    cert = bundle.modes[mode]
    targets = cert.settings.targets
    weights = np.asarray(config.loss_weights, dtype=float)
    pw_fn, pw_jac, pw_ctrl = config.penalty_weights
    v_penalty, v_penalty_grads, _ = lipschitz_penalty_gradients(
        cert.lyapunov, targets.L_L, pw_fn, targets.L_dL, pw_jac
    )
    c_penalty, c_penalty_grads, _ = lipschitz_penalty_gradients(
        cert.controller, targets.L_C, pw_ctrl
    )
    penalty = v_penalty + c_penalty
    with np.errstate(invalid="ignore"):
        total = float(weights @ parts.values) + penalty
    if not np.isfinite(total):
        bad = np.flatnonzero(~np.all(np.isfinite(parts.slacks), axis=1))
        index = int(batch.pair_ids[bad[0]]) if bad.size else None
        where = "" if not bad.size else f" at x={batch.xs[bad[0]].tolist()}"
        raise NonFiniteLossError(
            f"Loss of mode {mode} is not finite{where}", sample_index=index
        )

    active = parts.slacks - margins.eta > 0.0
    tau = margins.tau
    count = len(batch.xs)

    # V_p is evaluated at x*, at every x and at every x(tau).
    adj_zero = 0.0
    if abs(parts.zero_value) > 0.5 * zero_tolerance:
        adj_zero = weights[0] * np.sign(parts.zero_value)
    adj_x = np.zeros(count)
    d = parts.distinct
    adj_x[d] += -weights[1] * active[d, 0] + weights[2] * active[d, 1]
    decrease = active[:, 2] & batch.included
    adj_x += weights[3] * decrease * (cert.kappa - 1.0 / tau)
    adj_next = weights[3] * decrease / tau
    inputs = np.concatenate(
        [
            np.zeros((1, bundle.n)),
            bundle.shifted(batch.xs),
            bundle.shifted(parts.lie.x_next),
        ]
    )
    adjoint = np.concatenate([[adj_zero], adj_x, adj_next])
    value_grads = param_gradients(cert.lyapunov, inputs, adjoint)
    lyapunov_grads = [g + p for g, p in zip(value_grads, v_penalty_grads)]

    barrier = active[:, 3]
    rows = np.flatnonzero(decrease | barrier)
    if rows.size:
        xs, ws = batch.xs[rows], batch.ws[rows]
        x_next = parts.lie.x_next[rows]
        u, slope = bundle.saturate(bundle.raw_control(mode, xs, ws))
        jac = control_sensitivity(flow, xs, u, tau, config.fd_step)
        toward = (weights[3] * decrease[rows])[:, None] * bundle.grad_V(mode, x_next)
        toward -= (weights[4] * barrier[rows])[:, None] * bundle.grad_h(x_next)
        adj_u = np.einsum("bn,bnm->bm", toward, jac)
        ctrl_grads = param_gradients(
            cert.controller, bundle.controller_input(xs, ws), adj_u * slope
        )
    else:
        ctrl_grads = [np.zeros_like(a) for a in cert.controller.arrays()]
    controller_grads = [g + p for g, p in zip(ctrl_grads, c_penalty_grads)]

    logger.debug(
        "Mode %s batch of %d: L=%s, penalty=%.4g",
        mode,
        count,
        np.array2string(parts.values, precision=4),
        penalty,
    )
    return BatchLoss(
        sub_losses=parts.values,
        penalty=penalty,
        total=total,
        slacks=parts.slacks,
        lyapunov_grads=lyapunov_grads,
        controller_grads=controller_grads,
    )


@dataclass(frozen=True)
class LossValues:
    sub_losses: Sequence[float]
    penalty: float
    total: float


def grid_loss(
    bundle: CertificateBundle,
    mode: int,
    evaluation: GridEvaluation,
    margins: ValidityMargins,
    config: TrainConfig,
    zero_tolerance: float = ZERO_TOLERANCE,
) -> LossValues:
    """The loss of ``mode`` over a whole evaluated grid."""
    gaps = np.maximum(evaluation.slacks - margins.eta, 0.0)
    states = (evaluation.dist_index == 0) & evaluation.included
    zero_value = float(bundle.V(mode, bundle.reference_point))
    values = [
        _zero_loss(zero_value, zero_tolerance),
        float(gaps[states, 0].sum()),
        float(gaps[states, 1].sum()),
        float(gaps[evaluation.included, 2].sum()),
        float(gaps[:, 3].sum()),
    ]
    cert = bundle.modes[mode]
    penalty = lipschitz_penalty(
        cert.certified_constants(),
        cert.settings.targets.as_tuple(),
        config.penalty_weights,
    )
    with np.errstate(invalid="ignore"):
        total = float(np.dot(config.loss_weights, values)) + penalty
    return LossValues(tuple(values), penalty, total)
