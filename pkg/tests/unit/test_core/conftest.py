import numpy as np
import pytest

from dwellcert.core.certify import compute_margins
from dwellcert.core.cover import cover_product
from dwellcert.core.dynamics import VectorField
from dwellcert.core.flowmap import open_flow_maps
from dwellcert.core.training import train_all
from tests.unit.test_core.testcertificates import (
    EPS,
    EXCLUSION_RADIUS,
    TAU,
    certificate_config,
    linear_spec,
    train_config,
)


class Rotation(VectorField):
    """x' = p * J x + u with J the rotation generator. Not registered."""

    def __init__(self) -> None:
        self.n = 2
        self.m = 2
        self.modes = (1, 2)
        self.params = dict()

    def evaluate(self, mode, x, u):
        return mode * np.stack([-x[:, 1], x[:, 0]], axis=-1) + u


@pytest.fixture
def rotation():
    return Rotation()


@pytest.fixture(scope="function")
def provide_systems_a_b(monkeypatch, testutils):
    testutils.empty_system_registry(monkeypatch)

    class SystemA(Rotation):
        name = "A"

    class SystemB(Rotation):
        name = "B"

    return SystemA, SystemB


@pytest.fixture
def margins1(linear1, bundle1, samples1):
    return compute_margins(linear1, bundle1, samples1, TAU, EXCLUSION_RADIUS)


@pytest.fixture
def margins2(linear2, bundle2, samples2):
    return compute_margins(linear2, bundle2, samples2, TAU, EXCLUSION_RADIUS)


@pytest.fixture(scope="session")
def trained_shared():
    """A shared Lyapunov function and two controllers for linear_spec(2),
    trained from a random start. Takes a few seconds, so it is trained once
    per session."""
    spec = linear_spec(modes=2)
    samples = cover_product(spec, EPS, EPS)
    with open_flow_maps(spec) as flows:
        return train_all(
            spec,
            samples,
            certificate_config(modes=2, shared_V=True),
            train_config(learning_rate=1e-2, max_epochs=500),
            flows,
        )
