import re

import numpy as np
import pytest

from dwellcert.core.classk import (
    ClassKInftyParams,
    class_k_eval,
    class_k_lipschitz,
)
from dwellcert.core.errors import ValidationError


def test_class_k_functions():
    params = ClassKInftyParams(k1=0.5, k2=2.0, kw=3.0, gammaw=1.0)
    assert params.alpha1(2.0) == pytest.approx(2.0)
    assert params.alpha2(2.0) == pytest.approx(8.0)
    assert params.sigma(2.0) == pytest.approx(6.0)
    np.testing.assert_allclose(params.alpha2(np.array([0.0, 1.0, 3.0])), [0, 2, 18])


def test_class_k_functions_are_zero_at_zero_and_increasing():
    params = ClassKInftyParams(k1=0.1, k2=1.0, kw=1.0, gamma1=1.5)
    s = np.linspace(0, 5, 101)
    for values in (params.alpha1(s), params.alpha2(s), params.sigma(s)):
        assert values[0] == 0.0
        assert np.all(np.diff(values) > 0)


def test_class_k_negative_argument():
    with pytest.raises(ValidationError, match="defined for s >= 0 only"):
        class_k_eval(1.0, 2.0, np.array([1.0, -0.1]))


def test_class_k_lipschitz():
    # derivative of 3 s^2 at s = 2
    assert class_k_lipschitz(3.0, 2.0, 2.0) == pytest.approx(12.0)
    # linear functions have a constant slope
    assert class_k_lipschitz(3.0, 1.0, 100.0) == pytest.approx(3.0)


def test_k1_must_be_below_k2():
    with pytest.raises(ValidationError, match=re.escape("k1 < k2 required")):
        ClassKInftyParams(k1=2.0, k2=2.0, kw=1.0)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(k1=0.0), "k1 must be positive"),
        (dict(kw=-1.0), "kw must be positive"),
        (dict(gamma2=0.5), "gamma2 must be >= 1"),
        (dict(gammaw=np.nan), "gammaw must be >= 1"),
    ],
)
def test_class_k_validation(kwargs, message):
    values = dict(k1=0.5, k2=1.0, kw=1.0)
    values.update(kwargs)
    with pytest.raises(ValidationError, match=re.escape(message)):
        ClassKInftyParams(**values)


def test_to_dict():
    params = ClassKInftyParams(k1=0.5, k2=1.0, kw=1.0)
    assert params.to_dict() == dict(
        k1=0.5, k2=1.0, kw=1.0, gamma1=2.0, gamma2=2.0, gammaw=2.0
    )
    assert ClassKInftyParams(**params.to_dict()) == params
