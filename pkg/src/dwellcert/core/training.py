"""The training loop.

Each epoch streams the (x, w) pairs of the sample set in a seeded shuffle,
takes one Adam step per batch and then evaluates the conditions on the full
grid. Training stops as soon as verify_full passes, when the loss over the
grid drops to the residual tolerance (practical stability only), or when the
epoch budget is spent. The parameters returned are the ones with the
smallest worst slack seen, not the last ones.

Modes are trained independently (in worker threads, see train_all) unless
the Lyapunov function is shared, in which case every mode takes part in one
joint loop and the gradients of the shared network are summed.
"""

from __future__ import annotations

import csv
import logging
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bundle import init_bundle
from .certify import (
    compute_margins,
    dwell_time_min,
    estimate_zeta,
    evaluate_grid,
    verify_full,
)
from .constants import TrainStatus
from .errors import DegenerateCandidateError, NonFiniteLossError, ValidationError
from .losses import grid_loss, make_batch, total_loss
from .optimizer import Adam
from .report import VerificationReport, json_number

if typing.TYPE_CHECKING:
    from typing import Dict, Iterable, List, Optional, Sequence, Tuple

    from .bundle import CertificateBundle
    from .certify import GridEvaluation, ValidityMargins, ZetaEstimate
    from .config import CertificateConfig, SwitchedSystemSpec, TrainConfig
    from .constants import FloatArray
    from .cover import SampleSet
    from .flowmap import FlowMaps
    from .net import ParamArrays

logger = logging.getLogger(__name__)

LOG_FIELDS = (
    "epoch",
    "mode",
    "L1",
    "L2",
    "L3",
    "L4",
    "L5",
    "penalty",
    "total",
    "worst_lower_bound",
    "worst_upper_bound",
    "worst_decrease",
    "worst_barrier",
    "passed",
    "learning_rate",
)

_SEVERITY = (
    TrainStatus.CERTIFIED,
    TrainStatus.ISPS,
    TrainStatus.NO_CERTIFICATE,
    TrainStatus.DIVERGED,
)


@dataclass(frozen=True)
class EpochRecord:
    """One row of the training log."""

    epoch: int
    mode: int
    sub_losses: Tuple[float, ...]
    penalty: float
    total: float
    worst: Tuple[float, ...]
    """Worst slack of c1..c4 on the full grid"""
    passed: bool
    learning_rate: float

    def to_row(self) -> Dict[str, str]:
        values = [
            self.epoch,
            self.mode,
            *self.sub_losses,
            self.penalty,
            self.total,
            *(json_number(w) for w in self.worst),
            str(self.passed).lower(),
            self.learning_rate,
        ]
        return {name: _cell(v) for name, v in zip(LOG_FIELDS, values)}


def _cell(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_training_log(records: Iterable[EpochRecord], path: Path) -> Path:
    """Write the records as CSV with shortest round-trip decimals."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=LOG_FIELDS)
        writer.writeheader()
        for record in records:
            writer.writerow(record.to_row())
    logger.info("Wrote training log %s", path)
    return path


def worst_status(statuses: Iterable[TrainStatus]) -> TrainStatus:
    """The least favourable of the statuses."""
    return max(statuses, key=_SEVERITY.index, default=TrainStatus.NO_CERTIFICATE)


@dataclass(frozen=True, eq=False)
class TrainingResult:
    bundle: CertificateBundle
    """The best parameters found, in a bundle with every mode."""
    modes: Tuple[int, ...]
    """Modes that were trained"""
    status: TrainStatus
    report: VerificationReport
    """Verification of ``modes`` with the returned parameters"""
    log: List[EpochRecord] = field(default_factory=list)
    epochs: int = 0
    best_epoch: int = 0
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status == TrainStatus.CERTIFIED


class _Diverged(Exception):
    pass


class _Trainer:
    """State of one training loop over ``modes``."""

    def __init__(
        self,
        spec: SwitchedSystemSpec,
        modes: Tuple[int, ...],
        sample_set: SampleSet,
        certificate: CertificateConfig,
        training: TrainConfig,
        flows: FlowMaps,
        bundle: CertificateBundle,
    ) -> None:
        if training.batch_size > sample_set.pair_count:
            raise ValidationError(
                f"batch_size {training.batch_size} exceeds the "
                f"{sample_set.pair_count} (x, w) pairs of the sample set"
            )
        unknown = [p for p in modes if p not in bundle.modes]
        if unknown:
            raise ValidationError(
                f"modes {unknown} are not modes of the system "
                f"{list(bundle.mode_ids)}"
            )
        self.spec = spec
        self.modes = modes
        self.sample_set = sample_set
        self.certificate = certificate
        self.training = training
        self.flows = flows
        self.bundle = bundle
        self.shared = bundle.shared_V
        self.margins: ValidityMargins = compute_margins(
            spec,
            bundle,
            sample_set,
            certificate.tau,
            certificate.reference_exclusion_radius,
        )
        self.guard = spec.state_box.inflated(certificate.guard_margin)
        distances = np.linalg.norm(bundle.shifted(sample_set.state_samples), axis=1)
        self.included_states = self.margins.included(distances)

        adam = dict(
            lr=training.learning_rate,
            beta1=training.beta1,
            beta2=training.beta2,
            epsilon=training.adam_eps,
        )
        self.lyapunov_opt = {p: Adam(**adam) for p in modes}
        self.controller_opt = {p: Adam(**adam) for p in modes}

    def assess(
        self, bundle: CertificateBundle
    ) -> Tuple[VerificationReport, Dict[int, GridEvaluation]]:
        evaluations = evaluate_grid(
            bundle,
            self.margins,
            self.sample_set,
            self.flows,
            lie_substeps=self.certificate.lie_substeps,
            guard=self.guard,
            modes=self.modes,
        )
        report = verify_full(
            self.spec,
            bundle,
            self.margins,
            self.sample_set,
            self.flows,
            zero_tolerance=self.certificate.zero_tolerance,
            modes=self.modes,
            evaluations=evaluations,
        )
        return report, evaluations

    def step(self, pair_ids: np.ndarray, lr: float) -> None:
        batch = make_batch(self.sample_set, pair_ids, self.included_states)
        bundle = self.bundle
        shared_grads: Optional[ParamArrays] = None
        lyapunov: Dict[int, ParamArrays] = dict()
        controller: Dict[int, ParamArrays] = dict()
        for p in self.modes:
            loss = total_loss(
                bundle,
                p,
                batch,
                self.margins,
                self.flows[p],
                self.training,
                lie_substeps=self.certificate.lie_substeps,
                zero_tolerance=self.certificate.zero_tolerance,
            )
            cert = bundle.modes[p]
            controller[p] = self.controller_opt[p].step(
                cert.controller.arrays(), loss.controller_grads, lr
            )
            if self.shared:
                if shared_grads is None:
                    shared_grads = loss.lyapunov_grads
                else:
                    shared_grads = [
                        a + b for a, b in zip(shared_grads, loss.lyapunov_grads)
                    ]
            else:
                lyapunov[p] = self.lyapunov_opt[p].step(
                    cert.lyapunov.arrays(), loss.lyapunov_grads, lr
                )
        if shared_grads is not None:
            first = self.modes[0]
            lyapunov[first] = self.lyapunov_opt[first].step(
                bundle.modes[first].lyapunov.arrays(), shared_grads, lr
            )

        if not all(_finite(a) for a in (*lyapunov.values(), *controller.values())):
            raise _Diverged("parameters became non-finite")
        for p, arrays in controller.items():
            params = bundle.modes[p].controller.with_arrays(arrays)
            bundle = bundle.with_mode(p, controller=params)
        for p, arrays in lyapunov.items():
            params = bundle.modes[p].lyapunov.with_arrays(arrays)
            bundle = bundle.with_mode(p, lyapunov=params)
            if self.training.project_reference:
                bundle = bundle.project_reference(p)
        self.bundle = bundle

    def run(self) -> TrainingResult:
        training = self.training
        seed = [training.seed, 0 if self.shared else self.modes[0]]
        rng = np.random.default_rng(seed)
        report, _ = self.assess(self.bundle)
        best = (report.worst_gap(), self.bundle, report, 0)
        status = TrainStatus.NO_CERTIFICATE
        message = ""
        log: List[EpochRecord] = []
        epoch = 0
        pairs = self.sample_set.pair_count

        for epoch in range(1, training.max_epochs + 1):
            lr = training.learning_rate * training.lr_decay ** (epoch - 1)
            order = rng.permutation(pairs)
            try:
                for start in range(0, pairs, training.batch_size):
                    self.step(order[start : start + training.batch_size], lr)
            except (NonFiniteLossError, _Diverged) as exc:
                status = TrainStatus.DIVERGED
                message = f"diverged in epoch {epoch}: {exc}"
                logger.warning("Modes %s %s", list(self.modes), message)
                break

            report, evaluations = self.assess(self.bundle)
            total = 0.0
            for p in self.modes:
                losses = grid_loss(
                    self.bundle,
                    p,
                    evaluations[p],
                    self.margins,
                    training,
                    self.certificate.zero_tolerance,
                )
                total += losses.total
                log.append(
                    EpochRecord(
                        epoch=epoch,
                        mode=p,
                        sub_losses=tuple(losses.sub_losses),
                        penalty=losses.penalty,
                        total=losses.total,
                        worst=tuple(float(v) for v in evaluations[p].worst()),
                        passed=report.get(p).passed,
                        learning_rate=lr,
                    )
                )
            gap = report.worst_gap()
            logger.info(
                "Modes %s epoch %d: loss %.6g, worst gap %.6g%s",
                list(self.modes),
                epoch,
                total,
                gap,
                " (passed)" if report.success else "",
            )
            if report.success:
                best = (gap, self.bundle, report, epoch)
                status = TrainStatus.CERTIFIED
                break
            if gap < best[0]:
                best = (gap, self.bundle, report, epoch)
            if total <= training.residual_tolerance:
                status = TrainStatus.ISPS
                message = (
                    f"loss {total:.3g} is within the residual tolerance "
                    f"{training.residual_tolerance:.3g} but the conditions do "
                    "not hold everywhere"
                )
                break

        _, bundle, report, best_epoch = best
        return TrainingResult(
            bundle=bundle,
            modes=self.modes,
            status=status,
            report=report,
            log=log,
            epochs=epoch,
            best_epoch=best_epoch,
            message=message,
        )


def _finite(arrays: Sequence[FloatArray]) -> bool:
    return all(bool(np.all(np.isfinite(a))) for a in arrays)


def train_mode(
    spec: SwitchedSystemSpec,
    mode: int,
    sample_set: SampleSet,
    certificate: CertificateConfig,
    training: TrainConfig,
    flows: FlowMaps,
    initial: Optional[CertificateBundle] = None,
) -> TrainingResult:
    """Train V_p and g_p of one mode. ``initial`` defaults to the seeded
    initialization of every mode, so a single mode trains from the same
    start as in train_all."""
    if certificate.shared_V:
        raise ValidationError(
            "a shared Lyapunov function is trained for all modes at once "
            "(use train_shared)"
        )
    if initial is None:
        initial = init_bundle(
            spec, certificate, np.random.default_rng(training.seed)
        )
    logger.info("Training mode %s", mode)
    trainer = _Trainer(
        spec, (mode,), sample_set, certificate, training, flows, initial
    )
    result = trainer.run()
    logger.info("Mode %s finished: %s", mode, result.status)
    return result


def train_shared(
    spec: SwitchedSystemSpec,
    sample_set: SampleSet,
    certificate: CertificateConfig,
    training: TrainConfig,
    flows: FlowMaps,
    initial: Optional[CertificateBundle] = None,
) -> TrainingResult:
    """Train one Lyapunov function for every mode together with the
    controllers of all modes."""
    if initial is None:
        initial = init_bundle(
            spec, certificate, np.random.default_rng(training.seed)
        )
    if not initial.shared_V:
        raise ValidationError("train_shared needs a bundle with shared_V")
    logger.info("Training a shared Lyapunov function for modes %s", initial.mode_ids)
    trainer = _Trainer(
        spec, initial.mode_ids, sample_set, certificate, training, flows, initial
    )
    result = trainer.run()
    logger.info("Shared training finished: %s", result.status)
    return result


@dataclass(frozen=True, eq=False)
class TrainAllResult:
    bundle: CertificateBundle
    status: TrainStatus
    """The least favourable status over the modes"""
    results: Dict[int, TrainingResult]
    """Result of every mode (all modes share one result with shared_V)"""
    report: VerificationReport
    zeta: Optional[ZetaEstimate]
    tau_d_min: Optional[float]

    @property
    def partial(self) -> bool:
        """Some but not all modes are certified."""
        statuses = [r.status for r in self.results.values()]
        certified = TrainStatus.CERTIFIED
        return certified in statuses and self.status != certified

    @property
    def log(self) -> List[EpochRecord]:
        seen = set()
        records = []
        for result in self.results.values():
            if id(result) not in seen:
                seen.add(id(result))
                records.extend(result.log)
        return sorted(records, key=lambda r: (r.mode, r.epoch))


def train_all(
    spec: SwitchedSystemSpec,
    sample_set: SampleSet,
    certificate: CertificateConfig,
    training: TrainConfig,
    flows: FlowMaps,
    initial: Optional[CertificateBundle] = None,
    workers: int = 1,
) -> TrainAllResult:
    """Train every mode, then estimate zeta and the dwell-time bound.

    Without a shared Lyapunov function the modes are independent and run in
    up to ``workers`` threads; the result does not depend on the number of
    workers.
    """
    if initial is None:
        initial = init_bundle(
            spec, certificate, np.random.default_rng(training.seed)
        )
    results: Dict[int, TrainingResult]
    if initial.shared_V:
        shared = train_shared(spec, sample_set, certificate, training, flows, initial)
        results = {p: shared for p in initial.mode_ids}
        bundle = shared.bundle
    else:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            futures = {
                p: pool.submit(
                    train_mode,
                    spec,
                    p,
                    sample_set,
                    certificate,
                    training,
                    flows,
                    initial,
                )
                for p in initial.mode_ids
            }
            results = {p: future.result() for p, future in futures.items()}
        bundle = initial
        for p, result in results.items():
            bundle = bundle.merged(result.bundle, p)

    zeta: Optional[ZetaEstimate] = None
    tau_d_min: Optional[float] = None
    try:
        zeta = estimate_zeta(
            bundle, sample_set.state_samples, certificate.reference_exclusion_radius
        )
        tau_d_min = dwell_time_min(zeta.value, bundle.kappa_min)
    except DegenerateCandidateError as exc:
        logger.warning("No dwell-time bound: %s", exc)

    first = next(iter(results.values())).report
    report = VerificationReport(
        [results[p].report.get(p) for p in bundle.mode_ids],
        eta=first.eta,
        eps=first.eps,
        tau=first.tau,
        exclusion_radius=first.exclusion_radius,
        shared_V=bundle.shared_V,
        zeta=zeta,
        tau_d_min=tau_d_min,
    )
    status = worst_status(r.status for r in results.values())
    logger.info(
        "Training finished: %s, zeta=%s, kappa=%.6g, tau_d > %s",
        status,
        None if zeta is None else zeta.value,
        bundle.kappa_min,
        tau_d_min,
    )
    return TrainAllResult(bundle, status, results, report, zeta, tau_d_min)
