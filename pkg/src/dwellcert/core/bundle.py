"""The certificate bundle: per-mode Lyapunov and controller networks, the
barrier of the state box and the reference point.

All Lyapunov values are taken in shifted coordinates: V_p(x) is the network
evaluated at x - x*. Controllers see [x - x*, w].
"""

from __future__ import annotations

import typing
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .barrier import BarrierSpec
from .errors import ValidationError
from .net import (
    certify_lipschitz,
    forward,
    init_mlp,
    input_gradient,
)

if typing.TYPE_CHECKING:
    from typing import Dict, Iterable, Optional, Tuple

    from .box import CompactBox
    from .config import CertificateConfig, ModeSettings, SwitchedSystemSpec
    from .constants import FloatArray
    from .net import LipschitzCertificate, MlpParams


@dataclass(frozen=True, eq=False)
class ModeCertificate:
    """V_p, g_p and the settings they are certified against."""

    mode: int
    lyapunov: MlpParams
    """Input n, output 1"""
    controller: MlpParams
    """Input n + r, output m"""
    settings: ModeSettings

    @cached_property
    def lyapunov_certificate(self) -> LipschitzCertificate:
        return certify_lipschitz(self.lyapunov, jacobian=True)

    @cached_property
    def controller_certificate(self) -> LipschitzCertificate:
        return certify_lipschitz(self.controller, jacobian=False)

    @property
    def kappa(self) -> float:
        return self.settings.kappa

    @property
    def mu(self) -> float:
        return self.settings.mu

    def certified_constants(self) -> Tuple[float, float, float]:
        """(L_L, L_dL, L_C) as certified for the current parameters."""
        jac = self.lyapunov_certificate.L_jac
        return (
            self.lyapunov_certificate.L_fn,
            0.0 if jac is None else jac,
            self.controller_certificate.L_fn,
        )

    def within_targets(self) -> bool:
        return all(
            value <= target
            for value, target in zip(
                self.certified_constants(), self.settings.targets.as_tuple()
            )
        )


@dataclass(frozen=True, eq=False)
class CertificateBundle:
    modes: Dict[int, ModeCertificate]
    barrier: BarrierSpec
    reference_point: FloatArray
    shared_V: bool = False
    input_box: Optional[CompactBox] = None
    """Controller outputs are smoothly saturated into this box."""

    _order: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.modes:
            raise ValidationError("a certificate bundle needs at least one mode")
        ref = np.array(self.reference_point, dtype=float).reshape(-1)
        ref.setflags(write=False)
        object.__setattr__(self, "reference_point", ref)
        object.__setattr__(self, "_order", tuple(sorted(self.modes)))
        for mode, cert in self.modes.items():
            if cert.mode != mode:
                raise ValidationError(
                    f"mode key {mode} holds the certificate of mode {cert.mode}"
                )
            if cert.lyapunov.output_dim != 1 or cert.lyapunov.input_dim != ref.size:
                raise ValidationError(
                    f"mode {mode}: the Lyapunov net must map R^{ref.size} to R "
                    f"(got {cert.lyapunov!r})"
                )
        if self.shared_V:
            first = self.modes[self._order[0]].lyapunov
            if any(cert.lyapunov is not first for cert in self.modes.values()):
                raise ValidationError(
                    "shared_V bundles must use the identical Lyapunov network in "
                    "every mode"
                )

    @property
    def mode_ids(self) -> Tuple[int, ...]:
        return self._order

    @property
    def state_box(self) -> CompactBox:
        return self.barrier.box

    @property
    def n(self) -> int:
        return int(self.reference_point.size)

    @property
    def kappa_min(self) -> float:
        return min(cert.kappa for cert in self.modes.values())

    def shifted(self, x: FloatArray) -> FloatArray:
        return np.asarray(x, dtype=float) - self.reference_point

    def V(self, mode: int, x: FloatArray) -> FloatArray:
        """V_p(x) for a single state (returns a 0-d array) or a (B, n)
        batch (returns (B,))."""
        return forward(self.modes[mode].lyapunov, self.shifted(x))[..., 0]

    def grad_V(self, mode: int, x: FloatArray) -> FloatArray:
        return input_gradient(self.modes[mode].lyapunov, self.shifted(x))

    def h(self, x: FloatArray) -> FloatArray:
        return self.barrier.value(x)

    def grad_h(self, x: FloatArray) -> FloatArray:
        return self.barrier.gradient(x)

    def controller_input(self, x: FloatArray, w: FloatArray) -> FloatArray:
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if x.ndim == 1:
            return np.concatenate([self.shifted(x), w.reshape(-1)])
        return np.concatenate([self.shifted(x), w.reshape(len(x), -1)], axis=1)

    def raw_control(self, mode: int, x: FloatArray, w: FloatArray) -> FloatArray:
        """Controller output before saturation."""
        return forward(self.modes[mode].controller, self.controller_input(x, w))

    def saturate(self, v: FloatArray) -> Tuple[FloatArray, FloatArray]:
        """u = c + r tanh((v - c) / r) into the input box, and du/dv
        (elementwise). Identity without an input box."""
        if self.input_box is None:
            return v, np.ones_like(v)
        c = self.input_box.center
        r = self.input_box.half_widths
        t = np.tanh((v - c) / r)
        return c + r * t, 1.0 - t * t

    def control(self, mode: int, x: FloatArray, w: FloatArray) -> FloatArray:
        """u = g_p(x, w)"""
        return self.saturate(self.raw_control(mode, x, w))[0]

    def with_mode(
        self,
        mode: int,
        lyapunov: Optional[MlpParams] = None,
        controller: Optional[MlpParams] = None,
    ) -> CertificateBundle:
        """A new bundle with the networks of ``mode`` replaced. In shared_V
        bundles a new Lyapunov net replaces the one of every mode."""
        modes = dict(self.modes)
        if controller is not None:
            modes[mode] = replace(modes[mode], controller=controller)
        if lyapunov is not None:
            targets: Iterable[int] = self.modes if self.shared_V else [mode]
            for p in targets:
                modes[p] = replace(modes[p], lyapunov=lyapunov)
        return replace(self, modes=modes)

    def merged(self, other: CertificateBundle, mode: int) -> CertificateBundle:
        """This bundle with the networks of ``mode`` taken from ``other``."""
        if self.shared_V:
            raise ValidationError("shared_V bundles are trained jointly, not merged")
        cert = other.modes[mode]
        return self.with_mode(mode, lyapunov=cert.lyapunov, controller=cert.controller)

    def project_reference(self, mode: int) -> CertificateBundle:
        """Shift the output bias of V_p so that V_p(x*) = 0."""
        lyapunov = self.modes[mode].lyapunov
        value = forward(lyapunov, np.zeros(self.n))
        return self.with_mode(
            mode, lyapunov=lyapunov.with_output_bias(lyapunov.biases[-1] - value)
        )


def init_bundle(
    spec: SwitchedSystemSpec,
    config: CertificateConfig,
    rng: np.random.Generator,
) -> CertificateBundle:
    """Random networks for every mode. The Lyapunov nets start with
    V_p(x*) = 0 and the certified Lipschitz constants of V_p and g_p within
    their targets."""
    lyapunov_sizes = [spec.n, *config.lyapunov_hidden, 1]
    controller_sizes = [spec.n + spec.r, *config.controller_hidden, spec.m]
    shared = None
    if config.shared_V:
        target = min(s.targets.L_L for s in config.settings.values())
        shared = _zeroed(
            init_mlp(lyapunov_sizes, config.lyapunov_activation, rng, target),
            spec.n,
        )
    modes = dict()
    for mode in spec.modes:
        settings = config.settings[mode]
        if shared is not None:
            lyapunov = shared
        else:
            lyapunov = _zeroed(
                init_mlp(
                    lyapunov_sizes,
                    config.lyapunov_activation,
                    rng,
                    settings.targets.L_L,
                ),
                spec.n,
            )
        controller = init_mlp(
            controller_sizes,
            config.controller_activation,
            rng,
            settings.targets.L_C,
        )
        modes[mode] = ModeCertificate(mode, lyapunov, controller, settings)
    return CertificateBundle(
        modes=modes,
        barrier=spec.barrier,
        reference_point=spec.reference_point,
        shared_V=config.shared_V,
        input_box=spec.input_box,
    )


def _zeroed(params: MlpParams, n: int) -> MlpParams:
    value = forward(params, np.zeros(n))
    return params.with_output_bias(params.biases[-1] - value)
