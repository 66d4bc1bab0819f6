"""Loading and validating run configuration files.

A config file is TOML with the sections [system], [modes.N],
[certificate], [training] and [simulation]. load_config parses it into a
frozen RunConfig; every domain invariant is validated while parsing, so the
rest of dwellcert can assume valid objects.

Errors
------
ConfigError
    The file is missing or unreadable, or a key is missing or has the wrong
    type. The message names the dotted key, like ``modes.2.kappa``.
ValidationError
    A value is present but violates an invariant (for example k1 >= k2 or
    lo >= hi). The message names the field.
"""

from __future__ import annotations

import hashlib
import logging
import os
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .barrier import BarrierSpec
from .box import CompactBox
from .classk import ClassKInftyParams
from .constants import (
    DWELLCERT_WORKERS,
    ZERO_TOLERANCE,
    Activation,
    DisturbancePolicy,
    FlowKind,
    SwitchPolicy,
)
from .errors import ConfigError, ValidationError
from .registry import get_system

if sys.version_info < (3, 11):  # pragma: no-cover-if-py-gte-311
    import tomli as tomllib
else:  # pragma: no-cover-if-py-lt-311
    import tomllib

if typing.TYPE_CHECKING:
    from typing import (
        Any,
        Callable,
        Dict,
        List,
        Mapping,
        Optional,
        Tuple,
        TypeVar,
        Union,
    )

    from .constants import FloatArray
    from .dynamics import VectorField

    T = TypeVar("T")
    StrPath = Union[str, os.PathLike[str]]

logger = logging.getLogger(__name__)

EXTERNAL = "external"
"""The ``[system] dynamics`` value selecting an external process."""


def _positive(name: str, value: float) -> None:
    if not (np.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be positive (got {value})")


@dataclass(frozen=True)
class ModeConstants:
    """Asserted properties of the vector field f_p over X x U."""

    L_x: float
    """Lipschitz constant of f_p with respect to x"""
    L_u: float
    """Lipschitz constant of f_p with respect to u"""
    M_f: float
    """Bound on |f_p(x, u)|"""

    def __post_init__(self) -> None:
        for name in ("L_x", "L_u", "M_f"):
            _positive(name, getattr(self, name))


@dataclass(frozen=True)
class LipschitzTargets:
    """Lipschitz targets of one mode, fixed before training."""

    L_L: float
    """Target for the Lyapunov net itself"""
    L_dL: float
    """Target for the gradient of the Lyapunov net"""
    L_C: float
    """Target for the controller net"""

    def __post_init__(self) -> None:
        for name in ("L_L", "L_dL", "L_C"):
            _positive(name, getattr(self, name))

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.L_L, self.L_dL, self.L_C)


@dataclass(frozen=True)
class ModeSettings:
    """Certificate settings of one mode."""

    class_k: ClassKInftyParams
    kappa: float
    """Exponential decay rate of V_p"""
    mu: float
    """Slope of the barrier condition"""
    targets: LipschitzTargets
    M_L: Optional[float] = None
    """Bound on |grad V_p|. Defaults to the Lipschitz target L_L."""

    def __post_init__(self) -> None:
        _positive("kappa", self.kappa)
        _positive("mu", self.mu)
        if self.M_L is not None:
            _positive("M_L", self.M_L)

    @property
    def gradient_bound(self) -> float:
        return self.targets.L_L if self.M_L is None else self.M_L


@dataclass(frozen=True)
class DynamicsSource:
    """Where the dynamics come from: a registered builtin VectorField or an
    external process speaking the line protocol."""

    name: str
    params: Dict[str, Any] = field(default_factory=dict)
    command: Optional[List[str]] = None
    timeout: float = 10.0

    @property
    def kind(self) -> FlowKind:
        return FlowKind.EXTERNAL if self.name == EXTERNAL else FlowKind.BUILTIN

    def build(self) -> VectorField:
        """Instantiate the builtin VectorField."""
        if self.kind == FlowKind.EXTERNAL:
            raise ValidationError("external dynamics have no in-process vector field")
        system_class = get_system(self.name)
        return system_class(**self.params)


@dataclass(frozen=True, eq=False)
class SwitchedSystemSpec:
    """The plant: modes, dimensions, compact sets and asserted constants."""

    n: int
    m: int
    modes: Tuple[int, ...]
    state_box: CompactBox
    dist_box: CompactBox
    reference_point: FloatArray
    constants: Mapping[int, Optional[ModeConstants]]
    """Per-mode constants. None only while waiting for estimation."""
    dynamics: DynamicsSource
    input_box: Optional[CompactBox] = None
    estimate_constants: bool = False

    def __post_init__(self) -> None:
        if len(self.modes) < 1:
            raise ValidationError("at least one mode is required")
        if len(set(self.modes)) != len(self.modes):
            raise ValidationError(f"modes must be unique (got {list(self.modes)})")
        if set(self.constants) != set(self.modes):
            raise ValidationError(
                f"constants are needed for every mode {list(self.modes)} "
                f"(got {sorted(self.constants)})"
            )
        if self.state_box.dim != self.n:
            raise ValidationError(
                f"state_box has dimension {self.state_box.dim}, expected n={self.n}"
            )
        if self.input_box is not None and self.input_box.dim != self.m:
            raise ValidationError(
                f"input_box has dimension {self.input_box.dim}, expected m={self.m}"
            )
        ref = np.array(self.reference_point, dtype=float).reshape(-1)
        if ref.size != self.n:
            raise ValidationError(
                f"reference_point must have dimension {self.n} (got {ref.size})"
            )
        if not self.state_box.contains(ref):
            raise ValidationError(
                f"reference_point {ref.tolist()} is not inside the state box "
                f"{self.state_box!r}"
            )
        ref.setflags(write=False)
        object.__setattr__(self, "reference_point", ref)

    @property
    def r(self) -> int:
        """Disturbance dimension"""
        return self.dist_box.dim

    @property
    def barrier(self) -> BarrierSpec:
        return BarrierSpec(self.state_box)

    def constants_for(self, mode: int) -> ModeConstants:
        constants = self.constants[mode]
        if constants is None:
            raise ValidationError(
                f"L_x, L_u and M_f of mode {mode} are not known. Set them in "
                f"[modes.{mode}] or set estimate_constants = true."
            )
        return constants


@dataclass(frozen=True)
class CertificateConfig:
    settings: Dict[int, ModeSettings]
    eps_x: float
    eps_u: float
    tau: float
    """Sampling time of the Lie derivative estimate"""
    lie_substeps: int = 1
    """The controller is re-evaluated this many times within tau."""
    reference_exclusion_radius: float = 0.0
    """The bound and decrease conditions are required outside the ball of
    this radius around the reference point."""
    shared_V: bool = False
    lyapunov_hidden: Tuple[int, ...] = (16, 16)
    lyapunov_activation: Activation = Activation.TANH
    controller_hidden: Tuple[int, ...] = (16,)
    controller_activation: Activation = Activation.TANH
    sample_cap: int = 1_000_000
    zero_tolerance: float = ZERO_TOLERANCE
    guard_margin: float = 0.1
    """The guard box is the state box grown by this fraction of its widths."""

    def __post_init__(self) -> None:
        for name in ("eps_x", "eps_u", "tau"):
            _positive(name, getattr(self, name))
        if self.lie_substeps < 1:
            raise ValidationError(
                f"lie_substeps must be >= 1 (got {self.lie_substeps})"
            )
        if self.reference_exclusion_radius < 0:
            raise ValidationError(
                "reference_exclusion_radius must be >= 0 "
                f"(got {self.reference_exclusion_radius})"
            )
        if self.sample_cap < 1:
            raise ValidationError(f"sample_cap must be >= 1 (got {self.sample_cap})")
        _positive("zero_tolerance", self.zero_tolerance)
        if self.guard_margin < 0:
            raise ValidationError(
                f"guard_margin must be >= 0 (got {self.guard_margin})"
            )
        for name in ("lyapunov_hidden", "controller_hidden"):
            sizes = getattr(self, name)
            if any(size < 1 for size in sizes):
                raise ValidationError(f"{name} sizes must be >= 1 (got {list(sizes)})")

    @property
    def eps(self) -> float:
        return max(self.eps_x, self.eps_u)

    @property
    def kappa_min(self) -> float:
        return min(s.kappa for s in self.settings.values())


@dataclass(frozen=True)
class TrainConfig:
    loss_weights: Tuple[float, float, float, float, float] = (1.0, 1.0, 1.0, 1.0, 1.0)
    """c1..c5: zero-at-reference, lower bound, upper bound, decrease,
    barrier."""
    penalty_weights: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    """Weights of the Lipschitz penalties of V, grad V and the controller."""
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lr_decay: float = 1.0
    """The learning rate of epoch e is learning_rate * lr_decay**e."""
    batch_size: int = 256
    max_epochs: int = 200
    seed: int = 0
    residual_tolerance: float = 1e-5
    fd_step: float = 1e-4
    """Step of the central differences through the flow map."""
    project_reference: bool = True
    """Shift the output bias after every step so that V(x*) = 0."""

    def __post_init__(self) -> None:
        if len(self.loss_weights) != 5:
            raise ValidationError("loss_weights must have 5 entries")
        if len(self.penalty_weights) != 3:
            raise ValidationError("penalty_weights must have 3 entries")
        for i, weight in enumerate(self.loss_weights):
            _positive(f"loss_weights[{i}]", weight)
        for i, weight in enumerate(self.penalty_weights):
            _positive(f"penalty_weights[{i}]", weight)
        for name in ("learning_rate", "adam_eps", "lr_decay", "fd_step"):
            _positive(name, getattr(self, name))
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise ValidationError(f"{name} must be in [0, 1) (got {value})")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1 (got {self.batch_size})")
        if self.max_epochs < 0:
            raise ValidationError(f"max_epochs must be >= 0 (got {self.max_epochs})")
        if self.residual_tolerance < 0:
            raise ValidationError(
                f"residual_tolerance must be >= 0 (got {self.residual_tolerance})"
            )


@dataclass(frozen=True)
class SimulationConfig:
    x0: Optional[Tuple[float, ...]] = None
    tau_d: Optional[float] = None
    horizon: float = 20.0
    dt: float = 1e-3
    switch_policy: SwitchPolicy = SwitchPolicy.ROUND_ROBIN
    dist_policy: DisturbancePolicy = DisturbancePolicy.ZERO
    dist_hold: float = 0.5
    """Hold interval of the piecewise-constant disturbance"""
    dist_value: Optional[Tuple[float, ...]] = None
    """Value of the constant disturbance. Defaults to dist_box.hi."""
    seed: int = 0
    guard_scale: float = 2.0
    """The simulation aborts when the state leaves the state box scaled by
    this factor about its center."""

    def __post_init__(self) -> None:
        for name in ("horizon", "dt", "dist_hold"):
            _positive(name, getattr(self, name))
        if self.tau_d is not None:
            _positive("tau_d", self.tau_d)
        if self.guard_scale < 1:
            raise ValidationError(f"guard_scale must be >= 1 (got {self.guard_scale})")


@dataclass(frozen=True)
class RunConfig:
    system: SwitchedSystemSpec
    certificate: CertificateConfig
    training: TrainConfig
    simulation: SimulationConfig
    config_hash: str
    """SHA-256 of the raw bytes of the config file"""
    path: Optional[Path] = None


_MISSING: Any = object()


def _is_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_integer(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class _Section:
    """A table of the TOML document. Typed getters raise ConfigError naming
    the dotted key."""

    def __init__(self, data: Mapping[str, Any], prefix: str) -> None:
        self.data = data
        self.prefix = prefix

    def key(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def has(self, name: str) -> bool:
        return name in self.data

    def section(self, name: str, required: bool = True) -> _Section:
        value = self.data.get(name, _MISSING)
        if value is _MISSING:
            if required:
                raise ConfigError(f'Missing required section "[{self.key(name)}]"')
            value = dict()
        if not isinstance(value, dict):
            raise ConfigError(f'"{self.key(name)}" must be a table')
        return _Section(value, self.key(name))

    def _get(
        self, name: str, default: Any, check: Callable[[Any], bool], what: str
    ) -> Any:
        value = self.data.get(name, _MISSING)
        if value is _MISSING:
            if default is _MISSING:
                raise ConfigError(f'Missing required key "{self.key(name)}"')
            return default
        if not check(value):
            raise ConfigError(
                f'"{self.key(name)}" must be {what} (got {type(value).__name__})'
            )
        return value

    def real(self, name: str, default: Any = _MISSING) -> float:
        return float(self._get(name, default, _is_number, "a number"))

    def optional_real(self, name: str) -> Optional[float]:
        value = self._get(name, None, _is_number, "a number")
        return None if value is None else float(value)

    def integer(self, name: str, default: Any = _MISSING) -> int:
        return int(self._get(name, default, _is_integer, "an integer"))

    def boolean(self, name: str, default: Any = _MISSING) -> bool:
        return bool(
            self._get(name, default, lambda v: isinstance(v, bool), "a boolean")
        )

    def string(self, name: str, default: Any = _MISSING) -> str:
        return str(self._get(name, default, lambda v: isinstance(v, str), "a string"))

    def reals(self, name: str, default: Any = _MISSING) -> List[float]:
        value = self._get(name, default, _list_of(_is_number), "a list of numbers")
        return [float(v) for v in value]

    def optional_reals(self, name: str) -> Optional[List[float]]:
        return self.reals(name, None) if self.has(name) else None

    def integers(self, name: str, default: Any = _MISSING) -> List[int]:
        value = self._get(name, default, _list_of(_is_integer), "a list of integers")
        return [int(v) for v in value]

    def strings(self, name: str) -> List[str]:
        value = self._get(
            name, _MISSING, _list_of(lambda v: isinstance(v, str)), "a list of strings"
        )
        return [str(v) for v in value]

    def choice(self, name: str, enum: Any, default: Any = _MISSING) -> Any:
        value = self.string(name, default)
        try:
            return enum.parse(value, self.key(name))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _list_of(check: Callable[[Any], bool]) -> Callable[[Any], bool]:
    return lambda value: isinstance(value, list) and all(check(v) for v in value)


def load_config(path: StrPath) -> RunConfig:
    """Read a TOML run configuration.

    Raises
    ------
    ConfigError
        If the file is missing, is not valid TOML, or a key is missing or of
        the wrong type.
    ValidationError
        If a value violates an invariant.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"Could not read config file {path}: {exc}") from None
    run = parse_config(raw, path=path)
    logger.info("Loaded config %s (sha256 %s)", path, run.config_hash[:12])
    return run


def parse_config(raw: bytes, path: Optional[Path] = None) -> RunConfig:
    """Parse the bytes of a TOML run configuration. See load_config."""
    try:
        document = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"Config file {path} is not valid TOML: {exc}") from None

    root = _Section(document, "")
    system = _parse_system(root)
    modes_section = root.section("modes")
    constants: Dict[int, Optional[ModeConstants]] = dict()
    mode_sections: Dict[int, _Section] = dict()
    for mode in system.modes:
        section = modes_section.section(str(mode))
        mode_sections[mode] = section
        constants[mode] = _parse_constants(section, system.estimate_constants)

    spec = _validated(
        "system",
        lambda: SwitchedSystemSpec(
            n=system.n,
            m=system.m,
            modes=system.modes,
            state_box=system.state_box,
            dist_box=system.dist_box,
            input_box=system.input_box,
            reference_point=system.reference_point,
            constants=constants,
            dynamics=system.dynamics,
            estimate_constants=system.estimate_constants,
        ),
    )
    certificate = _parse_certificate(root.section("certificate"), mode_sections)
    training = _parse_training(root.section("training", required=False))
    simulation = _parse_simulation(root.section("simulation", required=False))
    return RunConfig(
        system=spec,
        certificate=certificate,
        training=training,
        simulation=simulation,
        config_hash=hashlib.sha256(raw).hexdigest(),
        path=path,
    )


@dataclass
class _SystemFields:
    n: int
    m: int
    modes: Tuple[int, ...]
    state_box: CompactBox
    dist_box: CompactBox
    input_box: Optional[CompactBox]
    reference_point: FloatArray
    dynamics: DynamicsSource
    estimate_constants: bool


def _parse_system(root: _Section) -> _SystemFields:
    section = root.section("system")
    name = section.string("dynamics")
    state_box = _box(section, "state", "state_box")
    dist_box = _box(section, "dist", "dist_box")
    input_box = None
    if section.has("input_lo") or section.has("input_hi"):
        input_box = _box(section, "input", "input_box")
    params = dict(section.section("params", required=False).data)
    estimate = section.boolean("estimate_constants", False)

    field_: Optional[VectorField] = None
    if name == EXTERNAL:
        command = section.strings("command")
        if not command:
            raise ConfigError('"system.command" must not be empty')
        dynamics = DynamicsSource(
            name, command=command, timeout=section.real("timeout", 10.0)
        )
        n = section.integer("n")
        m = section.integer("m")
    else:
        try:
            system_class = get_system(name)
        except ValueError as exc:
            raise ConfigError(f"system.dynamics: {exc}") from None
        try:
            field_ = system_class(**params)
        except TypeError as exc:
            raise ConfigError(f"system.params: {exc}") from None
        except ValidationError as exc:
            raise ValidationError(f"system.params: {exc}") from None
        dynamics = DynamicsSource(name, params=params)
        n = section.integer("n", field_.n)
        m = section.integer("m", field_.m)
        if (n, m) != (field_.n, field_.m):
            raise ValidationError(
                f"system: n={n}, m={m} do not match the dynamics "
                f'"{name}" (n={field_.n}, m={field_.m})'
            )

    default_modes = _MISSING if field_ is None else list(field_.modes)
    modes = section.integers("modes", default_modes)
    if field_ is None and sorted(modes) != list(range(1, len(modes) + 1)):
        raise ValidationError(
            f"system.modes: external dynamics number their modes 1..l (got {modes})"
        )
    if field_ is not None:
        unknown = [p for p in modes if p not in field_.modes]
        if unknown:
            raise ValidationError(
                f"system.modes: {unknown} are not modes of the dynamics "
                f'"{name}" (modes: {list(field_.modes)})'
            )

    reference = section.optional_reals("reference_point")
    if reference is None:
        equilibrium = field_.equilibrium() if field_ is not None else None
        if equilibrium is None:
            raise ConfigError('Missing required key "system.reference_point"')
        reference_point = np.asarray(equilibrium, dtype=float)
    else:
        reference_point = np.asarray(reference, dtype=float)

    return _SystemFields(
        n=n,
        m=m,
        modes=tuple(modes),
        state_box=state_box,
        dist_box=dist_box,
        input_box=input_box,
        reference_point=reference_point,
        dynamics=dynamics,
        estimate_constants=estimate,
    )


def _box(section: _Section, prefix: str, name: str) -> CompactBox:
    lo = section.reals(f"{prefix}_lo")
    hi = section.reals(f"{prefix}_hi")
    return _validated(
        section.prefix, lambda: CompactBox(np.array(lo), np.array(hi), name=name)
    )


def _parse_constants(section: _Section, estimate: bool) -> Optional[ModeConstants]:
    names = ("L_x", "L_u", "M_f")
    if estimate and not any(section.has(name) for name in names):
        return None
    values = {name: section.real(name) for name in names}
    return _validated(section.prefix, lambda: ModeConstants(**values))


def _parse_certificate(
    section: _Section, mode_sections: Dict[int, _Section]
) -> CertificateConfig:
    gammas = dict(
        gamma1=section.real("gamma1", 2.0),
        gamma2=section.real("gamma2", 2.0),
        gammaw=section.real("gammaw", 2.0),
    )
    settings = dict()
    for mode, mode_section in mode_sections.items():
        settings[mode] = _parse_mode_settings(mode_section, gammas)

    def build() -> CertificateConfig:
        return CertificateConfig(
            settings=settings,
            eps_x=section.real("eps_x"),
            eps_u=section.real("eps_u"),
            tau=section.real("tau"),
            lie_substeps=section.integer("lie_substeps", 1),
            reference_exclusion_radius=section.real("reference_exclusion_radius", 0.0),
            shared_V=section.boolean("shared_V", False),
            lyapunov_hidden=tuple(section.integers("lyapunov_hidden", [16, 16])),
            lyapunov_activation=section.choice(
                "lyapunov_activation", Activation, Activation.TANH
            ),
            controller_hidden=tuple(section.integers("controller_hidden", [16])),
            controller_activation=section.choice(
                "controller_activation", Activation, Activation.TANH
            ),
            sample_cap=section.integer("sample_cap", 1_000_000),
            zero_tolerance=section.real("zero_tolerance", ZERO_TOLERANCE),
            guard_margin=section.real("guard_margin", 0.1),
        )

    return _validated("certificate", build)


def _parse_mode_settings(section: _Section, gammas: Dict[str, float]) -> ModeSettings:
    def build() -> ModeSettings:
        class_k = ClassKInftyParams(
            k1=section.real("k1"),
            k2=section.real("k2"),
            kw=section.real("kw"),
            **gammas,
        )
        targets = LipschitzTargets(
            L_L=section.real("L_L"),
            L_dL=section.real("L_dL"),
            L_C=section.real("L_C"),
        )
        return ModeSettings(
            class_k=class_k,
            kappa=section.real("kappa"),
            mu=section.real("mu"),
            targets=targets,
            M_L=section.optional_real("M_L"),
        )

    return _validated(section.prefix, build)


def _parse_training(section: _Section) -> TrainConfig:
    defaults = TrainConfig()

    def build() -> TrainConfig:
        loss_weights = section.reals("loss_weights", list(defaults.loss_weights))
        penalty_weights = section.reals(
            "penalty_weights", list(defaults.penalty_weights)
        )
        return TrainConfig(
            loss_weights=tuple(loss_weights),  # type: ignore[arg-type]
            penalty_weights=tuple(penalty_weights),  # type: ignore[arg-type]
            learning_rate=section.real("learning_rate", defaults.learning_rate),
            beta1=section.real("beta1", defaults.beta1),
            beta2=section.real("beta2", defaults.beta2),
            adam_eps=section.real("adam_eps", defaults.adam_eps),
            lr_decay=section.real("lr_decay", defaults.lr_decay),
            batch_size=section.integer("batch_size", defaults.batch_size),
            max_epochs=section.integer("max_epochs", defaults.max_epochs),
            seed=section.integer("seed", defaults.seed),
            residual_tolerance=section.real(
                "residual_tolerance", defaults.residual_tolerance
            ),
            fd_step=section.real("fd_step", defaults.fd_step),
            project_reference=section.boolean(
                "project_reference", defaults.project_reference
            ),
        )

    return _validated("training", build)


def _parse_simulation(section: _Section) -> SimulationConfig:
    defaults = SimulationConfig()

    def build() -> SimulationConfig:
        x0 = section.optional_reals("x0")
        dist_value = section.optional_reals("dist_value")
        return SimulationConfig(
            x0=None if x0 is None else tuple(x0),
            tau_d=section.optional_real("tau_d"),
            horizon=section.real("horizon", defaults.horizon),
            dt=section.real("dt", defaults.dt),
            switch_policy=section.choice(
                "switch_policy", SwitchPolicy, defaults.switch_policy
            ),
            dist_policy=section.choice(
                "dist_policy", DisturbancePolicy, defaults.dist_policy
            ),
            dist_hold=section.real("dist_hold", defaults.dist_hold),
            dist_value=None if dist_value is None else tuple(dist_value),
            seed=section.integer("seed", defaults.seed),
            guard_scale=section.real("guard_scale", defaults.guard_scale),
        )

    return _validated("simulation", build)


def _validated(where: str, build: Callable[[], T]) -> T:
    """Run ``build`` and prefix validation errors with the config location."""
    try:
        return build()
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def workers_from_env() -> int:
    """Number of training workers from the DWELLCERT_WORKERS environment
    variable (default 1)."""
    value = os.environ.get(DWELLCERT_WORKERS, "").strip()
    if not value:
        return 1
    try:
        workers = int(value)
    except ValueError:
        workers = 0
    if workers < 1:
        raise ConfigError(
            f"{DWELLCERT_WORKERS} must be a positive integer (got {value!r})"
        )
    return workers
