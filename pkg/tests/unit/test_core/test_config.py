import hashlib
import re
from pathlib import Path

import numpy as np
import pytest

from dwellcert.core.config import (
    SimulationConfig,
    TrainConfig,
    load_config,
    parse_config,
    workers_from_env,
)
from dwellcert.core.constants import (
    Activation,
    DisturbancePolicy,
    FlowKind,
    SwitchPolicy,
)
from dwellcert.core.errors import ConfigError, ValidationError
from tests.unit.test_core.testcertificates import (
    certificate_config,
    handbuilt_toml,
    linear_spec,
)

CONFIGS = Path(__file__).parents[3] / "configs"

EXTERNAL_TOML = """\
[system]
dynamics = "external"
command = ["my-plant", "--serve"]
n = 1
m = 1
modes = {modes}
state_lo = [-1.0]
state_hi = [1.0]
dist_lo = [-0.1]
dist_hi = [0.1]
reference_point = [0.0]
"""


def replaced(text, old, new):
    assert old in text
    return text.replace(old, new, 1)


@pytest.mark.parametrize(
    "name", ["linear_1d.toml", "linear_shared.toml", "lotka_volterra.toml"]
)
def test_shipped_configs_load(name):
    path = CONFIGS / name
    run = load_config(path)
    assert run.path == path
    assert run.config_hash == hashlib.sha256(path.read_bytes()).hexdigest()
    assert set(run.certificate.settings) == set(run.system.modes)
    assert run.system.dynamics.kind == FlowKind.BUILTIN
    assert run.simulation.tau_d is not None


def test_lotka_volterra_config():
    run = load_config(CONFIGS / "lotka_volterra.toml")
    system = run.system
    assert (system.n, system.m, system.r) == (2, 1, 1)
    assert system.modes == (1, 2)
    # defaults to the interior equilibrium
    np.testing.assert_array_equal(system.reference_point, [1.0, 1.0])
    assert system.input_box is not None
    assert system.constants_for(1).L_x == 7.1
    assert run.certificate.eps == 0.1
    assert run.certificate.settings[1].kappa == 0.45
    assert run.certificate.kappa_min == 0.45
    assert run.certificate.lyapunov_activation == Activation.TANH
    assert run.training.lr_decay == 0.995
    assert run.simulation.x0 == (3.81, 2.61)
    assert run.simulation.tau_d == 1.5
    assert run.simulation.switch_policy == SwitchPolicy.ROUND_ROBIN
    assert run.simulation.dist_policy == DisturbancePolicy.PIECEWISE


def test_shared_config():
    run = load_config(CONFIGS / "linear_shared.toml")
    assert run.certificate.shared_V
    assert run.system.modes == (1, 2)
    assert run.simulation.tau_d == 0.05


@pytest.mark.parametrize("modes", [1, 2])
def test_handbuilt_config(write_config, modes):
    run = load_config(write_config(modes=modes))
    expected = linear_spec(modes)
    system = run.system
    assert (system.n, system.m, system.modes) == (1, 1, expected.modes)
    assert system.state_box == expected.state_box
    assert system.dist_box == expected.dist_box
    assert system.input_box is None
    np.testing.assert_array_equal(system.reference_point, expected.reference_point)
    assert dict(system.constants) == dict(expected.constants)
    assert system.dynamics == expected.dynamics
    assert run.certificate == certificate_config(modes=modes)
    assert run.training == TrainConfig(
        learning_rate=1e-9, batch_size=1024, max_epochs=1
    )
    assert run.simulation.x0 == (0.8,)
    assert run.simulation.dt == 0.01


def test_optional_sections_default():
    text = handbuilt_toml()
    text = text[: text.index("[training]")]
    run = parse_config(text.encode("utf-8"))
    assert run.training == TrainConfig()
    assert run.simulation == SimulationConfig()
    assert run.path is None


def test_config_hash_follows_bytes():
    text = handbuilt_toml()
    first = parse_config(text.encode("utf-8"))
    second = parse_config((text + "\n# comment\n").encode("utf-8"))
    assert first.config_hash != second.config_hash
    assert first.certificate == second.certificate


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="Config file not found"):
        load_config(tmp_path / "missing.toml")


def test_invalid_toml(write_config):
    path = write_config("[system\ndynamics = ")
    with pytest.raises(ConfigError, match="is not valid TOML"):
        load_config(path)


@pytest.mark.parametrize(
    "old, new, message",
    [
        ("kappa = 1.0\n", "", 'Missing required key "modes.1.kappa"'),
        ("tau = 0.001\n", "", 'Missing required key "certificate.tau"'),
        ("[certificate]", "[certificates]", 'Missing required section "[certificate]"'),
        ("eps_x = 0.004", 'eps_x = "small"', '"certificate.eps_x" must be a number'),
        ("dim = 1", "dim = 1\nspeed = 2", "system.params:"),
        ('"linear"', '"pendulum"', 'system.dynamics: No system with name "pendulum"'),
        ('"softplus"', '"relu"', 'Invalid value "relu"'),
        ("x0 = [0.8]", 'x0 = ["a"]', '"simulation.x0" must be a list of numbers'),
        ("max_epochs = 1", "max_epochs = 1.5", '"training.max_epochs" must be an'),
    ],
)
def test_config_errors(write_config, old, new, message):
    path = write_config(replaced(handbuilt_toml(), old, new))
    with pytest.raises(ConfigError, match=re.escape(message)):
        load_config(path)


@pytest.mark.parametrize(
    "old, new, message",
    [
        ("k2 = 2.0", "k2 = 0.05", "modes.1: k1 < k2 required"),
        ("kappa = 1.0", "kappa = -1.0", "modes.1: kappa must be positive"),
        ("L_x = 1.0", "L_x = 0.0", "modes.1: L_x must be positive"),
        ("state_hi = [1.0]", "state_hi = [-2.0]", "system: state_box: lo[0] < hi[0]"),
        ("decay = [1.0]", "decay = [-1.0]", "system.params: decay[0] must be"),
        ("tau = 0.001", "tau = 0.0", "certificate: tau must be positive"),
        ("dt = 0.01", "dt = 0.0", "simulation: dt must be positive"),
        ("batch_size = 1024", "batch_size = 0", "training: batch_size must be >= 1"),
        ("modes = [1]", "modes = [2]", "system.modes: [2] are not modes"),
        ("modes = [1]", "modes = [1]\nn = 2", "system: n=2, m=1 do not match"),
        (
            "dist_hi = [0.1]",
            "dist_hi = [0.1]\nreference_point = [3.0]",
            "system: reference_point [3.0] is not inside",
        ),
    ],
)
def test_validation_errors(write_config, old, new, message):
    path = write_config(replaced(handbuilt_toml(), old, new))
    with pytest.raises(ValidationError, match=re.escape(message)):
        load_config(path)


def test_external_modes_are_numbered_from_one():
    text = EXTERNAL_TOML.format(modes=[1, 3])
    with pytest.raises(ValidationError, match=re.escape("number their modes 1..l")):
        parse_config(text.encode("utf-8"))


def test_external_dynamics():
    mode_sections = handbuilt_toml()
    rest = mode_sections[mode_sections.index("\n[modes.1]") :]
    run = parse_config((EXTERNAL_TOML.format(modes=[1]) + rest).encode("utf-8"))
    dynamics = run.system.dynamics
    assert dynamics.kind == FlowKind.EXTERNAL
    assert dynamics.command == ["my-plant", "--serve"]
    assert dynamics.timeout == 10.0
    with pytest.raises(ValidationError, match="no in-process vector field"):
        dynamics.build()


def test_estimated_constants_may_be_left_out():
    text = replaced(handbuilt_toml(), "L_x = 1.0\nL_u = 1.0\nM_f = 1.2\n", "")
    with pytest.raises(ConfigError, match='Missing required key "modes.1.L_x"'):
        parse_config(text.encode("utf-8"))

    text = replaced(
        text, 'dynamics = "linear"', 'dynamics = "linear"\nestimate_constants = true'
    )
    run = parse_config(text.encode("utf-8"))
    assert run.system.estimate_constants
    assert run.system.constants[1] is None
    with pytest.raises(ValidationError, match="are not known"):
        run.system.constants_for(1)


def test_workers_default(monkeypatch):
    monkeypatch.delenv("DWELLCERT_WORKERS", raising=False)
    assert workers_from_env() == 1


def test_workers_from_env(DWELLCERT_WORKERS_eq_2):
    assert workers_from_env() == 2


@pytest.mark.parametrize("value", ["0", "-3", "many"])
def test_invalid_workers(monkeypatch, value):
    monkeypatch.setenv("DWELLCERT_WORKERS", value)
    with pytest.raises(ConfigError, match="must be a positive integer"):
        workers_from_env()
