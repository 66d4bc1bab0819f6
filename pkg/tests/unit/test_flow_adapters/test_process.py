import math

import pytest

from dwellcert.core.errors import FlowProtocolError, FlowTransportError
from dwellcert.flow_adapters.process import (
    ExternalProcess,
    format_floats,
    parse_floats,
)


def test_format_floats_round_trips():
    values = [0.1, -1 / 3, 1e-300, 2.0]
    text = format_floats(values)
    assert text == "0.1 -0.3333333333333333 1e-300 2.0"
    assert parse_floats(text, 4) == values
    assert format_floats([math.inf, math.nan]) == "inf nan"


@pytest.mark.parametrize(
    "line, count, message",
    [
        ("1.0 2.0", 3, "Expected 3 numbers, got 2 fields"),
        ("", 1, "Expected 1 numbers, got 0 fields"),
        ("1.0 x", 2, "Response is not numeric"),
        ("ERROR unknown mode 3", 4, "Response is not numeric"),
    ],
)
def test_parse_floats_errors(line, count, message):
    with pytest.raises(FlowProtocolError, match=message) as excinfo:
        parse_floats(line, count)
    assert excinfo.value.line == line


def test_missing_executable(tmp_path):
    with pytest.raises(FlowTransportError, match="Could not start dynamics process"):
        ExternalProcess([str(tmp_path / "no-such-program")], n=1, m=1, modes=1)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(command=[]), "command must not be empty"),
        (dict(command=["x"], timeout=0.0), "timeout must be positive"),
    ],
)
def test_invalid_arguments(kwargs, message):
    with pytest.raises(ValueError, match=message):
        ExternalProcess(n=1, m=1, modes=1, **kwargs)
