"""This package is private to dwellcert; anything inside here is to be
considered as implementation details!

The public Python API is re-exported from the top level dwellcert package.
"""

from .barrier import BarrierSpec as BarrierSpec
from .box import CompactBox as CompactBox
from .bundle import CertificateBundle as CertificateBundle
from .bundle import ModeCertificate as ModeCertificate
from .bundle import init_bundle as init_bundle
from .certify import ValidityMargins as ValidityMargins
from .certify import compute_margins as compute_margins
from .certify import decay_rate as decay_rate
from .certify import dwell_time_min as dwell_time_min
from .certify import estimate_zeta as estimate_zeta
from .certify import evaluate_grid as evaluate_grid
from .certify import iss_gain as iss_gain
from .certify import lie_estimate as lie_estimate
from .certify import rho as rho
from .certify import verify_full as verify_full
from .checkpoint import load_bundle as load_bundle
from .checkpoint import load_checkpoint as load_checkpoint
from .checkpoint import save_bundle as save_bundle
from .classk import ClassKInftyParams as ClassKInftyParams
from .config import RunConfig as RunConfig
from .config import SwitchedSystemSpec as SwitchedSystemSpec
from .config import load_config as load_config
from .constants import Condition as Condition
from .constants import DisturbancePolicy as DisturbancePolicy
from .constants import ExitCode as ExitCode
from .constants import FlowKind as FlowKind
from .constants import SimulationStatus as SimulationStatus
from .constants import SwitchPolicy as SwitchPolicy
from .constants import TrainStatus as TrainStatus
from .cover import SampleSet as SampleSet
from .cover import cover_box as cover_box
from .cover import cover_product as cover_product
from .dynamics import VectorField as VectorField
from .errors import CheckpointError as CheckpointError
from .errors import ConfigError as ConfigError
from .errors import DegenerateCandidateError as DegenerateCandidateError
from .errors import DwellTimeWarning as DwellTimeWarning
from .errors import EmpiricalConstantsWarning as EmpiricalConstantsWarning
from .errors import FlowProtocolError as FlowProtocolError
from .errors import FlowTransportError as FlowTransportError
from .errors import LooseCertificateWarning as LooseCertificateWarning
from .errors import NonFiniteLossError as NonFiniteLossError
from .errors import NonFiniteStateError as NonFiniteStateError
from .errors import SampleCapError as SampleCapError
from .errors import SystemRegistryError as SystemRegistryError
from .errors import ValidationError as ValidationError
from .flowmap import FlowMapHandle as FlowMapHandle
from .flowmap import VectorFieldFlowMap as VectorFieldFlowMap
from .flowmap import open_flow_maps as open_flow_maps
from .net import MlpParams as MlpParams
from .net import certify_lipschitz as certify_lipschitz
from .registry import get_system as get_system
from .registry import list_systems as list_systems
from .report import VerificationReport as VerificationReport
from .sim import gen_disturbance as gen_disturbance
from .sim import gen_switching as gen_switching
from .sim import monitor_iss_bound as monitor_iss_bound
from .sim import simulate_closed_loop as simulate_closed_loop
from .strenum import StrEnum as StrEnum
from .training import train_all as train_all
from .training import train_mode as train_mode
