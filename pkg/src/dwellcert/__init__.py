# NOTE The systems sub-package is imported for registering the builtin
# dynamics.
from __future__ import annotations

import typing

if typing.TYPE_CHECKING:
    from typing import Type

from . import systems as systems

try:
    from ._version import __version__ as __version__
    from ._version import version_tuple as version_tuple
except ImportError:  # pragma: no cover
    # Likely an editable install. Should ever happen if installed from a
    # distribution package (sdist or wheel)
    __version__ = "undefined"
    version_tuple = (0, 0, 0, "undefined")


from .core import CertificateBundle as CertificateBundle
from .core import CheckpointError as CheckpointError
from .core import ClassKInftyParams as ClassKInftyParams
from .core import CompactBox as CompactBox
from .core import Condition as Condition
from .core import ConfigError as ConfigError
from .core import DegenerateCandidateError as DegenerateCandidateError
from .core import DisturbancePolicy as DisturbancePolicy
from .core import DwellTimeWarning as DwellTimeWarning
from .core import EmpiricalConstantsWarning as EmpiricalConstantsWarning
from .core import FlowMapHandle as FlowMapHandle
from .core import FlowProtocolError as FlowProtocolError
from .core import FlowTransportError as FlowTransportError
from .core import LooseCertificateWarning as LooseCertificateWarning
from .core import MlpParams as MlpParams
from .core import ModeCertificate as ModeCertificate
from .core import NonFiniteLossError as NonFiniteLossError
from .core import NonFiniteStateError as NonFiniteStateError
from .core import RunConfig as RunConfig
from .core import SampleCapError as SampleCapError
from .core import SampleSet as SampleSet
from .core import SimulationStatus as SimulationStatus
from .core import SwitchedSystemSpec as SwitchedSystemSpec
from .core import SwitchPolicy as SwitchPolicy
from .core import SystemRegistryError as SystemRegistryError
from .core import TrainStatus as TrainStatus
from .core import ValidationError as ValidationError
from .core import VectorField as VectorField
from .core import VectorFieldFlowMap as VectorFieldFlowMap
from .core import VerificationReport as VerificationReport
from .core import cover_box as cover_box
from .core import cover_product as cover_product
from .core import dwell_time_min as dwell_time_min
from .core import estimate_zeta as estimate_zeta
from .core import gen_disturbance as gen_disturbance
from .core import gen_switching as gen_switching
from .core import get_system as get_system
from .core import iss_gain as iss_gain
from .core import lie_estimate as lie_estimate
from .core import load_bundle as load_bundle
from .core import load_config as load_config
from .core import monitor_iss_bound as monitor_iss_bound
from .core import open_flow_maps as open_flow_maps
from .core import save_bundle as save_bundle
from .core import simulate_closed_loop as simulate_closed_loop
from .core import train_all as train_all
from .core import train_mode as train_mode
from .core import verify_full as verify_full

ExternalProcess: Type[object]
"""This is lazily imported below, so that importing dwellcert does not pull
in the subprocess and threading machinery of the external adapter."""


def __getattr__(name: str) -> object:
    """Some lazy implementation of lazy loading.

    See: https://peps.python.org/pep-0562/
    """
    if name == "ExternalProcess":
        from dwellcert.flow_adapters.process import ExternalProcess

        return ExternalProcess
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
