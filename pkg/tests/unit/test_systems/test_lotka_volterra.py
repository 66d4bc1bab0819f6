import numpy as np
import pytest

from dwellcert.core.errors import ValidationError
from dwellcert.core.flowmap import VectorFieldFlowMap
from dwellcert.systems.lotka_volterra import LotkaVolterra, builtin_lotka_volterra

X = np.array([2.0, 2.0])

# RK4 with ten substeps of 1 ms, mode 1, u = 0
STEP = (1.979902339, 2.019897673)


@pytest.fixture
def field():
    return LotkaVolterra()


def test_vector_field(field):
    # x1' = x1 - x1 x2 + u (mode 1), x2' = -x2 + x1 x2 + u (mode 2)
    np.testing.assert_allclose(field(1, X, [0.5]), [-1.5, 2.0])
    np.testing.assert_allclose(field(2, X, [0.5]), [-2.0, 2.5])
    batch = field.evaluate(1, np.array([[2.0, 2.0], [1.0, 3.0]]), np.zeros((2, 1)))
    np.testing.assert_allclose(batch, [[-2.0, 2.0], [-2.0, 0.0]])


def test_equilibrium(field):
    np.testing.assert_array_equal(field.equilibrium(), [1.0, 1.0])
    other = LotkaVolterra(a=2.0, b=4.0, c=3.0, d=1.5)
    np.testing.assert_array_equal(other.equilibrium(), [2.0, 0.5])
    for mode in other.modes:
        np.testing.assert_allclose(other(mode, other.equilibrium(), [0.0]), 0.0)


def test_flow_map_step(field):
    flow = VectorFieldFlowMap(field, 1)
    np.testing.assert_allclose(flow.step(X, [0.0], 0.01), STEP, atol=1e-8)


def test_first_integral_is_conserved(field):
    flow = VectorFieldFlowMap(field, 2)
    x = X
    for _ in range(100):
        x = flow.step(x, [0.0], 0.05)
    assert field.first_integral(x) == pytest.approx(field.first_integral(X), abs=1e-9)
    assert not np.allclose(x, X)


def test_builtin_lotka_volterra():
    flows = builtin_lotka_volterra()
    assert [flow.mode for flow in flows] == [1, 2]
    assert all((flow.n, flow.m) == (2, 1) for flow in flows)
    np.testing.assert_allclose(flows[0].step(X, [0.0], 0.01), STEP, atol=1e-8)
    # input enters the predator equation in mode 2
    moved = flows[1].step(X, [0.5], 0.01)
    np.testing.assert_allclose(moved, [1.979852680, 2.024922084], atol=1e-8)


@pytest.mark.parametrize("name", ["a", "b", "c", "d"])
def test_parameters_must_be_positive(name):
    with pytest.raises(ValidationError, match=f"{name} must be positive"):
        LotkaVolterra(**{name: 0.0})


def test_unknown_mode(field):
    with pytest.raises(ValidationError, match="Unknown mode 3"):
        field(3, X, [0.0])
