"""This module defines the CLI for dwellcert

This is called either with

    python -m dwellcert <command> [args]

or using the executable

    dwellcert <command> [args]

Every command writes its artifacts under --out and a run manifest to
<out>/manifests/<command>.json. Exit codes are listed in
dwellcert.core.constants.ExitCode.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import typing
import warnings
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

import numpy as np

from dwellcert.core.bundle import init_bundle
from dwellcert.core.certify import (
    compute_margins,
    dwell_time_min,
    estimate_zeta,
    rho,
    verify_full,
)
from dwellcert.core.checkpoint import load_checkpoint, save_bundle
from dwellcert.core.config import load_config, workers_from_env
from dwellcert.core.constants import (
    DisturbancePolicy,
    ExitCode,
    SimulationStatus,
    SwitchPolicy,
    TrainStatus,
)
from dwellcert.core.cover import SampleSet, cover_product
from dwellcert.core.errors import (
    CheckpointError,
    ConfigError,
    DegenerateCandidateError,
    DwellTimeWarning,
    FlowProtocolError,
    FlowTransportError,
    SampleCapError,
    ValidationError,
)
from dwellcert.core.flowmap import open_flow_maps, with_estimated_constants
from dwellcert.core.manifest import RunManifest
from dwellcert.core.sim import (
    gen_disturbance,
    gen_switching,
    monitor_iss_bound,
    simulate_closed_loop,
    warn_below_dwell,
    write_switch_events,
    write_trajectory,
)
from dwellcert.core.training import train_all, train_mode, write_training_log

if typing.TYPE_CHECKING:
    from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

    from dwellcert.core.bundle import CertificateBundle
    from dwellcert.core.certify import ZetaEstimate
    from dwellcert.core.config import RunConfig, SwitchedSystemSpec
    from dwellcert.core.flowmap import FlowMaps
    from dwellcert.core.training import EpochRecord

logger = logging.getLogger(__name__)

COVER_PATH = Path("cover", "samples.npz")
CHECKPOINT_PATH = Path("checkpoints", "bundle.json")
TRAINING_REPORT_PATH = Path("reports", "training.json")
VERIFICATION_REPORT_PATH = Path("reports", "verification.json")
DWELL_REPORT_PATH = Path("reports", "dwell.json")
TRAJECTORY_PATH = Path("simulation", "trajectory.csv")
SWITCH_EVENTS_PATH = Path("simulation", "switch_events.csv")
MONITOR_PATH = Path("simulation", "monitor.json")

EXIT_CODE_FOR_STATUS = {
    TrainStatus.CERTIFIED: ExitCode.OK,
    TrainStatus.ISPS: ExitCode.ISPS,
    TrainStatus.NO_CERTIFICATE: ExitCode.NO_CERTIFICATE,
    TrainStatus.DIVERGED: ExitCode.NO_CERTIFICATE,
}


class UsageError(ValueError):
    """Arguments that parse but make no sense together with the config."""


def main(argv: Optional[List[str]] = None) -> int:
    sysargs = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_arguments(sysargs)
    except SystemExit as exc:
        # argparse exits with 2 on errors and 0 on --help
        return int(exc.code or 0)
    _configure_logging(args.verbose)

    manifest = RunManifest(args.command, Path(args.out), argv=sysargs)
    command: Callable[[argparse.Namespace, RunManifest], int] = COMMANDS[args.command]
    try:
        code = command(args, manifest)
    except (ConfigError, ValidationError, CheckpointError, UsageError) as exc:
        print(f"dwellcert {args.command}: error: {exc}", file=sys.stderr)
        code = ExitCode.ARGUMENT_ERROR
    except (FlowTransportError, FlowProtocolError) as exc:
        print(f"dwellcert {args.command}: dynamics process: {exc}", file=sys.stderr)
        code = ExitCode.ARGUMENT_ERROR
    except SampleCapError as exc:
        print(f"dwellcert {args.command}: error: {exc}", file=sys.stderr)
        code = ExitCode.RESOURCE_ERROR
    except DegenerateCandidateError as exc:
        print(f"dwellcert {args.command}: no certificate: {exc}", file=sys.stderr)
        code = ExitCode.NO_CERTIFICATE
    manifest.write(code)
    return int(code)


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", force=True
    )


def _load(args: argparse.Namespace, manifest: RunManifest) -> RunConfig:
    config = load_config(args.config)
    manifest.config_hash = config.config_hash
    manifest.seed = config.training.seed
    return config


@contextmanager
def _system(config: RunConfig) -> Iterator[Tuple[SwitchedSystemSpec, FlowMaps]]:
    """The system spec with every constant filled in, and its flow maps."""
    spec = config.system
    with open_flow_maps(spec) as flows:
        if spec.estimate_constants:
            spec = with_estimated_constants(spec, flows)
        yield spec, flows


def _cover(config: RunConfig, scale: int = 1) -> SampleSet:
    cert = config.certificate
    return cover_product(
        config.system,
        cert.eps_x / scale,
        cert.eps_u / scale,
        cap=cert.sample_cap,
    )


def _load_bundle(
    args: argparse.Namespace, config: Optional[RunConfig]
) -> Tuple[CertificateBundle, Dict[str, Any]]:
    path = Path(args.out) / CHECKPOINT_PATH
    expected = None
    if config is not None and not getattr(args, "ignore_config_hash", False):
        expected = config.config_hash
    checkpoint = load_checkpoint(path, expected_hash=expected)
    return checkpoint.bundle, checkpoint.metadata


def _write_json(manifest: RunManifest, relative: Path, data: Dict[str, Any]) -> Path:
    path = manifest.out_dir / relative
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return manifest.add(path)


def _zeta(
    bundle: CertificateBundle, states: np.ndarray, exclusion_radius: float
) -> Tuple[Optional[ZetaEstimate], Optional[float]]:
    try:
        zeta = estimate_zeta(bundle, states, exclusion_radius)
    except DegenerateCandidateError as exc:
        logger.warning("Could not estimate zeta: %s", exc)
        return None, None
    return zeta, dwell_time_min(zeta.value, bundle.kappa_min)


def cmd_cover(args: argparse.Namespace, manifest: RunManifest) -> int:
    config = _load(args, manifest)
    sample_set = _cover(config)
    path = manifest.out_dir / COVER_PATH
    sample_set.save(path)
    manifest.add(path)

    cert = config.certificate
    print(f"N = {sample_set.N} state samples (eps_x = {cert.eps_x:g})")
    print(f"M = {sample_set.M} disturbance samples (eps_u = {cert.eps_u:g})")
    print(f"eps = {sample_set.eps:g}")

    with _system(config) as (spec, _):
        bundle = init_bundle(
            spec, cert, np.random.default_rng(config.training.seed)
        )
        margins = compute_margins(
            spec, bundle, sample_set, cert.tau, cert.reference_exclusion_radius
        )
    print(f"eta preview = {margins.eta:.6g} (networks at their Lipschitz targets)")
    return ExitCode.OK


def _write_logs(manifest: RunManifest, records: List[EpochRecord]) -> None:
    by_mode: Dict[int, List[EpochRecord]] = dict()
    for record in records:
        by_mode.setdefault(record.mode, []).append(record)
    for mode, rows in sorted(by_mode.items()):
        path = manifest.out_dir / "logs" / f"training_mode_{mode}.csv"
        manifest.add(write_training_log(rows, path))


def cmd_train(args: argparse.Namespace, manifest: RunManifest) -> int:
    config = _load(args, manifest)
    certificate = config.certificate
    if args.shared_v and not certificate.shared_V:
        certificate = replace(certificate, shared_V=True)
    if args.mode is not None:
        if args.mode not in config.system.modes:
            raise UsageError(
                f"--mode {args.mode} is not a mode of the system "
                f"(modes: {list(config.system.modes)})"
            )
        if certificate.shared_V:
            raise UsageError(
                "the config asks for a shared Lyapunov function; train all modes "
                "with --all or --shared-v"
            )

    initial: Optional[CertificateBundle] = None
    if args.resume:
        initial, _ = _load_bundle(args, config)
        if initial.shared_V != certificate.shared_V:
            raise UsageError(
                f"checkpoint has shared_V={initial.shared_V}, the run asks for "
                f"shared_V={certificate.shared_V}"
            )
        logger.info("Resuming from %s", Path(args.out) / CHECKPOINT_PATH)
    sample_set = _cover(config)

    with _system(config) as (spec, flows):
        if args.mode is not None:
            result = train_mode(
                spec,
                args.mode,
                sample_set,
                certificate,
                config.training,
                flows,
                initial,
            )
            bundle, status, report = result.bundle, result.status, result.report
            zeta, tau_d_min = None, None
            records = result.log
        else:
            everything = train_all(
                spec,
                sample_set,
                certificate,
                config.training,
                flows,
                initial,
                workers=workers_from_env(),
            )
            bundle, status, report = (
                everything.bundle,
                everything.status,
                everything.report,
            )
            zeta, tau_d_min = everything.zeta, everything.tau_d_min
            records = everything.log

    metadata = {
        "status": str(status),
        "trained_modes": [args.mode] if args.mode is not None else list(spec.modes),
        "reference_exclusion_radius": certificate.reference_exclusion_radius,
        "zeta": None if zeta is None else zeta.value,
        "tau_d_min": tau_d_min,
    }
    path = manifest.out_dir / CHECKPOINT_PATH
    manifest.add(save_bundle(bundle, path, config.config_hash, metadata))
    _write_logs(manifest, records)
    data = report.to_dict()
    data.update(status=str(status), config_hash=config.config_hash)
    _write_json(manifest, TRAINING_REPORT_PATH, data)

    print(f"Training status: {status}")
    for line in report.summary_lines():
        print(line)
    if report.failure:
        print(report.get_failure_text())
    return EXIT_CODE_FOR_STATUS[status]


def cmd_verify(args: argparse.Namespace, manifest: RunManifest) -> int:
    config = _load(args, manifest)
    bundle, _ = _load_bundle(args, config)
    cert = config.certificate
    grid = _cover(config, scale=args.refine)
    logger.info(
        "Verifying on %d x %d pairs (refinement %d)", grid.N, grid.M, args.refine
    )
    with _system(config) as (spec, flows):
        margins = compute_margins(
            spec, bundle, grid, cert.tau, cert.reference_exclusion_radius
        )
        zeta, _ = _zeta(bundle, grid.state_samples, cert.reference_exclusion_radius)
        report = verify_full(
            spec,
            bundle,
            margins,
            grid,
            flows,
            lie_substeps=cert.lie_substeps,
            guard_margin=cert.guard_margin,
            zero_tolerance=cert.zero_tolerance,
            zeta=zeta,
            config_hash=config.config_hash,
        )
    data = report.to_dict()
    data["refine"] = args.refine
    data["excluded_states"] = {
        str(p): report.get(p).excluded_states for p in report.modes
    }
    _write_json(manifest, VERIFICATION_REPORT_PATH, data)

    print("PASS" if report.success else "FAIL")
    for line in report.summary_lines():
        print(line)
    if report.failure:
        print(report.get_failure_text())
        return ExitCode.NO_CERTIFICATE
    return ExitCode.OK


def _state_grid(bundle: CertificateBundle, density: int) -> np.ndarray:
    box = bundle.state_box
    axes = [np.linspace(lo, hi, density) for lo, hi in zip(box.lo, box.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def cmd_dwell(args: argparse.Namespace, manifest: RunManifest) -> int:
    notes: List[str] = []
    estimate: Optional[ZetaEstimate] = None
    bundle: Optional[CertificateBundle] = None
    metadata: Dict[str, Any] = dict()
    if args.zeta is None or args.kappa is None:
        bundle, metadata = _load_bundle(args, None)
        if len(bundle.mode_ids) == 1:
            notes.append("single mode: there is no switching to constrain")
        elif bundle.shared_V:
            notes.append("shared Lyapunov function: arbitrary switching is allowed")
    if args.zeta is not None:
        zeta = args.zeta
        notes.append("zeta given on the command line")
    else:
        assert bundle is not None
        exclusion = float(metadata.get("reference_exclusion_radius") or 0.0)
        estimate = estimate_zeta(
            bundle, _state_grid(bundle, args.grid_density), exclusion
        )
        zeta = estimate.value
    if args.kappa is not None:
        kappa = args.kappa
        notes.append("kappa given on the command line")
    else:
        assert bundle is not None
        kappa = bundle.kappa_min
    bound = dwell_time_min(zeta, kappa)

    print(f"zeta = {zeta:.6g}")
    print(f"kappa = {kappa:.6g}")
    print(f"tau_d > {bound:.6f}")
    for note in notes:
        print(f"note: {note}")
    _write_json(
        manifest,
        DWELL_REPORT_PATH,
        {
            "zeta": zeta,
            "kappa": kappa,
            "tau_d_min": bound,
            "grid_density": args.grid_density,
            "zeta_estimate": None if estimate is None else estimate.to_dict(),
            "notes": notes,
        },
    )
    return ExitCode.OK


def cmd_simulate(args: argparse.Namespace, manifest: RunManifest) -> int:
    config = _load(args, manifest)
    bundle, _ = _load_bundle(args, config)
    sim = config.simulation
    x0 = args.x0 if args.x0 is not None else sim.x0
    if x0 is None:
        raise UsageError("no initial state: pass --x0 or set simulation.x0")
    tau_d = args.tau_d if args.tau_d is not None else sim.tau_d
    if tau_d is None:
        raise UsageError("no dwell time: pass --tau-d or set simulation.tau_d")
    horizon = args.horizon if args.horizon is not None else sim.horizon
    dt = args.dt if args.dt is not None else sim.dt
    switch_policy = args.switch_policy or sim.switch_policy
    dist_policy = args.dist_policy or sim.dist_policy
    seed = args.seed if args.seed is not None else sim.seed
    manifest.seed = seed
    spec = config.system

    states = _cover(config).state_samples
    zeta, tau_d_min = _zeta(
        bundle, states, config.certificate.reference_exclusion_radius
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DwellTimeWarning)
        below = warn_below_dwell(tau_d, tau_d_min)
    for warning in caught:
        print(f"warning: {warning.message}", file=sys.stderr)

    switching = gen_switching(tau_d, horizon, spec.modes, switch_policy, seed)
    disturbance = gen_disturbance(
        spec.dist_box, horizon, dist_policy, seed, sim.dist_hold, sim.dist_value
    )
    with open_flow_maps(spec) as flows:
        trajectory = simulate_closed_loop(
            spec,
            bundle,
            x0,
            switching,
            disturbance,
            horizon,
            dt,
            flows,
            guard_scale=sim.guard_scale,
        )

    monitor = None
    if zeta is not None and not below and rho(zeta.value, bundle.kappa_min, tau_d) < 1:
        monitor = monitor_iss_bound(
            trajectory, bundle, zeta.value, bundle.kappa_min, tau_d
        )
    out = manifest.out_dir
    manifest.add(write_trajectory(trajectory, out / TRAJECTORY_PATH, monitor))
    manifest.add(write_switch_events(trajectory.switches, out / SWITCH_EVENTS_PATH))
    summary: Dict[str, Any] = {
        "status": str(trajectory.status),
        "steps": len(trajectory) - 1,
        "switches": len(trajectory.switches),
        "unsafe_steps": trajectory.unsafe_steps,
        "tau_d": tau_d,
        "tau_d_min": tau_d_min,
        "seed": seed,
        "monitor": None if monitor is None else monitor.to_dict(),
    }
    _write_json(manifest, MONITOR_PATH, summary)

    print(f"Simulation {trajectory.status}: {len(trajectory) - 1} steps")
    print(f"unsafe steps: {trajectory.unsafe_steps}")
    if monitor is not None:
        state = "holds" if monitor.passed else "VIOLATED"
        print(f"ISS bound {state} (min margin {monitor.min_margin:.6g})")
    else:
        print("ISS bound not monitored (tau_d is not above the dwell-time bound)")
    if trajectory.status != SimulationStatus.COMPLETED:
        print(f"Run stopped early: {trajectory.status}")
    return ExitCode.OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunManifest], int]] = {
    "cover": cmd_cover,
    "train": cmd_train,
    "verify": cmd_verify,
    "dwell": cmd_dwell,
    "simulate": cmd_simulate,
}


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (np.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be positive (got {text})")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1 (got {text})")
    return value


def _density(text: str) -> int:
    value = _positive_int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"must be at least 2 (got {text})")
    return value


def _vector(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma separated numbers (got {text!r})"
        ) from None


def parse_arguments(sysargs: List[str]) -> argparse.Namespace:
    """Parses arguments from sys.argv"""
    return _get_argparser().parse_args(sysargs)


def _get_argparser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dwellcert",
        description=(
            "Train and verify neural ISS control Lyapunov functions, barrier "
            "certificates and controllers for switched systems."
        ),
        formatter_class=lambda prog: argparse.HelpFormatter(
            prog,
            max_help_position=27,
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log progress (-v) or everything (-vv)",
    )
    common.add_argument(
        "--out",
        default="out",
        help="Directory for every artifact (default: ./out)",
    )

    def config_argument(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("config", help="Path to the TOML run configuration")

    def hash_argument(sub: argparse.ArgumentParser) -> None:
        sub.add_argument(
            "--ignore-config-hash",
            action="store_true",
            help="Load a checkpoint written for a different config file",
        )

    commands = parser.add_subparsers(dest="command", required=True)

    cover = commands.add_parser(
        "cover", parents=[common], help="Build the sampling grid"
    )
    config_argument(cover)

    train = commands.add_parser(
        "train", parents=[common], help="Train certificates and controllers"
    )
    config_argument(train)
    which = train.add_mutually_exclusive_group(required=True)
    which.add_argument("--mode", type=int, help="Train a single mode")
    which.add_argument("--all", action="store_true", help="Train every mode")
    which.add_argument(
        "--shared-v",
        action="store_true",
        help="Train one Lyapunov function shared by every mode",
    )
    train.add_argument(
        "--resume",
        action="store_true",
        help="Start from the checkpoint in the output directory",
    )
    hash_argument(train)

    verify = commands.add_parser(
        "verify", parents=[common], help="Verify a checkpoint on the grid"
    )
    config_argument(verify)
    verify.add_argument(
        "--refine",
        type=_positive_int,
        default=1,
        metavar="K",
        help="Verify on a grid K times finer than the training grid",
    )
    hash_argument(verify)

    dwell = commands.add_parser(
        "dwell", parents=[common], help="Compute the dwell-time bound"
    )
    dwell.add_argument(
        "--grid-density",
        type=_density,
        default=50,
        metavar="N",
        help="Points per dimension of the zeta grid (default: 50)",
    )
    dwell.add_argument(
        "--zeta", type=float, help="Use this zeta instead of estimating it"
    )
    dwell.add_argument(
        "--kappa", type=float, help="Use this kappa instead of the checkpoint's"
    )

    simulate = commands.add_parser(
        "simulate", parents=[common], help="Simulate the switched closed loop"
    )
    config_argument(simulate)
    simulate.add_argument("--x0", type=_vector, help="Initial state, e.g. 3.81,2.61")
    simulate.add_argument("--tau-d", type=_positive_float, help="Dwell time")
    simulate.add_argument("--horizon", type=_positive_float, help="Seconds")
    simulate.add_argument("--dt", type=_positive_float, help="Time step")
    simulate.add_argument(
        "--switch-policy", choices=SwitchPolicy.values(), help="Switching signal"
    )
    simulate.add_argument(
        "--dist-policy", choices=DisturbancePolicy.values(), help="Disturbance"
    )
    simulate.add_argument("--seed", type=int, help="Seed of the random signals")
    hash_argument(simulate)
    return parser


if __name__ == "__main__":
    sys.exit(main())
