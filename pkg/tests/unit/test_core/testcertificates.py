"""A certificate of the scalar system x' = -a x + u that is known to hold.

The Lyapunov network is V(x) = 4 softplus(x) + 4 softplus(-x) - 8 ln 2,
which equals 8 ln cosh(x / 2), and the controller passes the disturbance
through: u = w. Then x^2 - x^4 / 24 <= V(x) <= x^2 and
grad V = 4 tanh(x / 2), so the closed loop x' = -a x + w satisfies every
sampled condition with room to spare.

Certified constants: L_L = 8, L_dL = 2 sqrt(2), L_C = 1.
"""

from __future__ import annotations

import math
import typing

import numpy as np

from dwellcert.core.box import CompactBox
from dwellcert.core.bundle import CertificateBundle, ModeCertificate
from dwellcert.core.classk import ClassKInftyParams
from dwellcert.core.config import (
    CertificateConfig,
    DynamicsSource,
    LipschitzTargets,
    ModeConstants,
    ModeSettings,
    SwitchedSystemSpec,
    TrainConfig,
)
from dwellcert.core.constants import Activation
from dwellcert.core.net import MlpParams

if typing.TYPE_CHECKING:
    from typing import Dict, Optional, Sequence

EPS = 0.004
TAU = 1e-3
EXCLUSION_RADIUS = 0.6

DECAYS = (1.0, 2.0)
"""decay of mode 1 and mode 2"""


def lyapunov_net(scale: float = 1.0) -> MlpParams:
    """scale * 8 ln cosh(x / 2)"""
    return MlpParams(
        weights=(np.array([[1.0], [-1.0]]), np.array([[4.0 * scale, 4.0 * scale]])),
        biases=(np.zeros(2), np.array([-8.0 * scale * math.log(2.0)])),
        activation=Activation.SOFTPLUS,
    )


def controller_net(weights: Sequence[float] = (0.0, 1.0)) -> MlpParams:
    """u = weights . [x - x*, w]"""
    return MlpParams(
        weights=(np.array([list(weights)]),),
        biases=(np.zeros(1),),
        activation=Activation.TANH,
    )


def mode_settings(kappa: float = 1.0, L_C: float = 1.2) -> ModeSettings:
    return ModeSettings(
        class_k=ClassKInftyParams(k1=0.1, k2=2.0, kw=10.0),
        kappa=kappa,
        mu=1.0,
        targets=LipschitzTargets(L_L=8.5, L_dL=3.0, L_C=L_C),
    )


def mode_constants(mode: int) -> ModeConstants:
    decay = DECAYS[mode - 1]
    return ModeConstants(L_x=decay, L_u=1.0, M_f=decay + 0.2)


def linear_spec(modes: int = 1) -> SwitchedSystemSpec:
    ids = tuple(range(1, modes + 1))
    return SwitchedSystemSpec(
        n=1,
        m=1,
        modes=ids,
        state_box=CompactBox(np.array([-1.0]), np.array([1.0]), name="state_box"),
        dist_box=CompactBox(np.array([-0.1]), np.array([0.1]), name="dist_box"),
        reference_point=np.zeros(1),
        constants={p: mode_constants(p) for p in ids},
        dynamics=DynamicsSource(
            "linear", params=dict(dim=1, decay=list(DECAYS[:modes]), gain=1.0)
        ),
    )


def certificate_config(
    modes: int = 1,
    shared_V: bool = False,
    eps: float = EPS,
    settings: Optional[Dict[int, ModeSettings]] = None,
) -> CertificateConfig:
    if settings is None:
        settings = {p: mode_settings() for p in range(1, modes + 1)}
    return CertificateConfig(
        settings=settings,
        eps_x=eps,
        eps_u=eps,
        tau=TAU,
        reference_exclusion_radius=EXCLUSION_RADIUS,
        shared_V=shared_V,
        lyapunov_hidden=(2,),
        lyapunov_activation=Activation.SOFTPLUS,
        controller_hidden=(),
    )


def train_config(**overrides: object) -> TrainConfig:
    values: Dict[str, object] = dict(
        learning_rate=1e-9, batch_size=1024, max_epochs=1, seed=0
    )
    values.update(overrides)
    return TrainConfig(**values)  # type: ignore[arg-type]


def handbuilt_bundle(
    modes: int = 1,
    shared_V: bool = False,
    settings: Optional[Dict[int, ModeSettings]] = None,
    lyapunov: Optional[Dict[int, MlpParams]] = None,
    controller: Optional[MlpParams] = None,
) -> CertificateBundle:
    """The certificate of the module docstring for modes 1..``modes``.
    ``lyapunov`` replaces the Lyapunov net of single modes."""
    shared = lyapunov_net()
    certs = dict()
    for p in range(1, modes + 1):
        net = shared if lyapunov is None else lyapunov.get(p, shared)
        certs[p] = ModeCertificate(
            mode=p,
            lyapunov=net,
            controller=controller_net() if controller is None else controller,
            settings=mode_settings() if settings is None else settings[p],
        )
    spec = linear_spec(modes)
    return CertificateBundle(
        modes=certs,
        barrier=spec.barrier,
        reference_point=spec.reference_point,
        shared_V=shared_V,
    )


HANDBUILT_TOML = """\
[system]
dynamics = "linear"
modes = {modes}
state_lo = [-1.0]
state_hi = [1.0]
dist_lo = [-0.1]
dist_hi = [0.1]

[system.params]
dim = 1
decay = {decays}
gain = 1.0
{mode_sections}
[certificate]
eps_x = {eps}
eps_u = {eps}
tau = {tau}
reference_exclusion_radius = {radius}
shared_V = {shared}
lyapunov_hidden = [2]
lyapunov_activation = "softplus"
controller_hidden = []

[training]
learning_rate = 1e-9
batch_size = 1024
max_epochs = 1

[simulation]
x0 = [0.8]
tau_d = 0.5
horizon = 2.0
dt = 0.01
"""

MODE_TOML = """
[modes.{mode}]
L_x = {L_x}
L_u = 1.0
M_f = {M_f}
k1 = 0.1
k2 = 2.0
kw = 10.0
kappa = 1.0
mu = 1.0
L_L = 8.5
L_dL = 3.0
L_C = 1.2
"""


def handbuilt_toml(modes: int = 1, shared_V: bool = False) -> str:
    """A config file describing linear_spec(modes) and certificate_config."""
    sections = "".join(
        MODE_TOML.format(mode=p, L_x=repr(c.L_x), M_f=repr(c.M_f))
        for p, c in ((p, mode_constants(p)) for p in range(1, modes + 1))
    )
    return HANDBUILT_TOML.format(
        modes=list(range(1, modes + 1)),
        decays=list(DECAYS[:modes]),
        mode_sections=sections,
        eps=EPS,
        tau=TAU,
        radius=EXCLUSION_RADIUS,
        shared=str(shared_V).lower(),
    )
