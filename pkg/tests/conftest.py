import typing
from typing import Optional

import pytest

from dwellcert.core.cover import cover_product
from dwellcert.core.flowmap import open_flow_maps
from dwellcert.core.strenum import StrEnum
from tests.unit.test_core.testcertificates import (
    EPS,
    certificate_config,
    handbuilt_bundle,
    handbuilt_toml,
    linear_spec,
)


@pytest.fixture
def assert_strenum_values():

    def _assert_strenum_values(strenum_cls: typing.Type[StrEnum], values: typing.Any):
        """Note: `values` is a typing.Literal. Could not find a type annotation
        for that"""
        assert set(typing.get_args(values)) == {member.value for member in strenum_cls}

    return _assert_strenum_values


@pytest.fixture
def linear1():
    """The scalar system x' = -x + u on X = [-1, 1], W = [-0.1, 0.1]."""
    return linear_spec(modes=1)


@pytest.fixture
def linear2():
    """Two modes with decays 1 and 2."""
    return linear_spec(modes=2)


@pytest.fixture
def bundle1():
    return handbuilt_bundle(modes=1)


@pytest.fixture
def bundle2():
    return handbuilt_bundle(modes=2)


@pytest.fixture
def shared_bundle2():
    return handbuilt_bundle(modes=2, shared_V=True)


@pytest.fixture
def samples1(linear1):
    return cover_product(linear1, EPS, EPS)


@pytest.fixture
def samples2(linear2):
    return cover_product(linear2, EPS, EPS)


@pytest.fixture
def flows1(linear1):
    with open_flow_maps(linear1) as flows:
        yield flows


@pytest.fixture
def flows2(linear2):
    with open_flow_maps(linear2) as flows:
        yield flows


@pytest.fixture
def cert_config1():
    return certificate_config(modes=1)


@pytest.fixture
def write_config(tmp_path):
    """Writes a config file and returns its path. Without text, writes the
    config of the hand-built certificate."""

    def _write_config(
        text: Optional[str] = None,
        modes: int = 1,
        shared_V: bool = False,
        name: str = "run.toml",
    ):
        path = tmp_path / name
        if text is None:
            text = handbuilt_toml(modes=modes, shared_V=shared_V)
        path.write_text(text, encoding="utf-8")
        return path

    return _write_config
