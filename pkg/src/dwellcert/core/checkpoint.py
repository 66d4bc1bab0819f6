"""JSON checkpoints of certificate bundles.

A checkpoint holds everything needed to evaluate and reason about the
certificates without the config file: the networks and settings of every
mode, the state box (which defines the barrier), the input box and the
reference point. The SHA-256 of the config file it was trained from is
stored alongside and checked on load.
"""

from __future__ import annotations

import json
import logging
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .barrier import BarrierSpec
from .box import CompactBox
from .bundle import CertificateBundle, ModeCertificate
from .classk import ClassKInftyParams
from .config import LipschitzTargets, ModeSettings
from .errors import CheckpointError, ValidationError
from .net import MlpParams

if typing.TYPE_CHECKING:
    from typing import Any, Dict, Optional, Union

    StrPath = Union[str, os.PathLike[str]]

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "dwellcert-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    bundle: CertificateBundle
    config_hash: Optional[str]
    metadata: Dict[str, Any] = field(default_factory=dict)
    """Free-form data stored next to the bundle, like training status."""


def bundle_to_dict(
    bundle: CertificateBundle,
    config_hash: Optional[str] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    modes = dict()
    for mode in bundle.mode_ids:
        cert = bundle.modes[mode]
        settings = cert.settings
        modes[str(mode)] = {
            "lyapunov": cert.lyapunov.to_dict(),
            "controller": cert.controller.to_dict(),
            "class_k": settings.class_k.to_dict(),
            "kappa": settings.kappa,
            "mu": settings.mu,
            "targets": dict(zip(("L_L", "L_dL", "L_C"), settings.targets.as_tuple())),
            "M_L": settings.M_L,
            "certificates": {
                "lyapunov": cert.lyapunov_certificate.to_dict(),
                "controller": cert.controller_certificate.to_dict(),
            },
        }
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "shared_V": bundle.shared_V,
        "reference_point": bundle.reference_point.tolist(),
        "state_box": bundle.state_box.to_dict(),
        "input_box": None if bundle.input_box is None else bundle.input_box.to_dict(),
        "modes": modes,
        "metadata": metadata or dict(),
    }


def bundle_from_dict(data: Dict[str, Any]) -> Checkpoint:
    """Inverse of bundle_to_dict.

    Raises
    ------
    CheckpointError
        On a wrong format tag or version, or missing or malformed fields.
    """
    if not isinstance(data, dict) or data.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not a dwellcert checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {data.get('version')!r} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    try:
        shared_V = bool(data["shared_V"])
        state_box = CompactBox.from_dict(data["state_box"], name="state_box")
        input_box = None
        if data["input_box"] is not None:
            input_box = CompactBox.from_dict(data["input_box"], name="input_box")
        shared: Optional[MlpParams] = None
        modes = dict()
        for key, entry in data["modes"].items():
            mode = int(key)
            lyapunov = MlpParams.from_dict(entry["lyapunov"])
            if shared_V:
                # one object for every mode
                shared = lyapunov if shared is None else shared
                lyapunov = shared
            settings = ModeSettings(
                class_k=ClassKInftyParams(**entry["class_k"]),
                kappa=float(entry["kappa"]),
                mu=float(entry["mu"]),
                targets=LipschitzTargets(**entry["targets"]),
                M_L=None if entry["M_L"] is None else float(entry["M_L"]),
            )
            controller = MlpParams.from_dict(entry["controller"])
            modes[mode] = ModeCertificate(mode, lyapunov, controller, settings)
        bundle = CertificateBundle(
            modes=modes,
            barrier=BarrierSpec(state_box),
            reference_point=np.asarray(data["reference_point"], dtype=float),
            shared_V=shared_V,
            input_box=input_box,
        )
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        # ValidationError is a ValueError
        kind = "invalid" if isinstance(exc, ValidationError) else "malformed"
        raise CheckpointError(f"{kind} checkpoint: {exc!r}") from None
    return Checkpoint(bundle, data.get("config_hash"), dict(data.get("metadata") or {}))


def save_bundle(
    bundle: CertificateBundle,
    path: StrPath,
    config_hash: Optional[str] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write ``bundle`` as JSON. The file is replaced atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(bundle_to_dict(bundle, config_hash, metadata), indent=2)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text + "\n", encoding="utf-8")
    os.replace(tmp, path)
    logger.info("Wrote checkpoint %s", path)
    return path


def load_checkpoint(path: StrPath, expected_hash: Optional[str] = None) -> Checkpoint:
    """Read a checkpoint written by save_bundle.

    Raises
    ------
    CheckpointError
        If the file is missing, corrupt, or ``expected_hash`` is given and
        differs from the stored config hash.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CheckpointError(f"Checkpoint not found: {path}") from None
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"Could not read checkpoint {path}: {exc}") from None
    checkpoint = bundle_from_dict(data)
    if expected_hash is not None and checkpoint.config_hash != expected_hash:
        raise CheckpointError(
            f"Checkpoint {path} was written for config hash "
            f"{str(checkpoint.config_hash)[:12]}..., not {expected_hash[:12]}... "
            "(use --ignore-config-hash to load it anyway)"
        )
    logger.debug("Loaded checkpoint %s", path)
    return checkpoint


def load_bundle(
    path: StrPath, expected_hash: Optional[str] = None
) -> CertificateBundle:
    return load_checkpoint(path, expected_hash).bundle
