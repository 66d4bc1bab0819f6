import io

import numpy as np
import pytest

from dwellcert.core.flowmap import VectorFieldFlowMap
from dwellcert.flow_adapters.serve import main, parse_params, serve
from dwellcert.systems.linear import Linear
from dwellcert.systems.lotka_volterra import LotkaVolterra


def served(field, *requests):
    stdout = io.StringIO()
    serve(field, io.StringIO("".join(r + "\n" for r in requests)), stdout)
    return stdout.getvalue().splitlines()


def test_handshake():
    assert served(LotkaVolterra()) == ["HELLO 2 1 2"]
    assert served(Linear(dim=3, decay=[1.0, 2.0, 3.0])) == ["HELLO 3 3 3"]


def test_step():
    field = LotkaVolterra()
    lines = served(field, "STEP 2 2.0 2.0 0.5 0.01", "", "STEP 1 2.0 2.0 0.0 0.01")
    assert len(lines) == 3
    expected = VectorFieldFlowMap(field, 2).step([2.0, 2.0], [0.5], 0.01)
    assert [float(v) for v in lines[1].split()] == expected.tolist()
    np.testing.assert_allclose(
        [float(v) for v in lines[2].split()], [1.979902339, 2.019897673], atol=1e-8
    )


@pytest.mark.parametrize(
    "request_, response",
    [
        ("STEP 1 2.0 2.0 0.01", "ERROR expected 'STEP <mode> <2 states>"),
        ("MOVE 1 2.0 2.0 0.0 0.01", "ERROR expected 'STEP <mode> <2 states>"),
        ("STEP 1 2.0 two 0.0 0.01", "ERROR non-numeric field"),
        ("STEP 3 2.0 2.0 0.0 0.01", "ERROR unknown mode 3"),
        ("STEP 1 2.0 2.0 0.0 -0.01", "ERROR dt must be positive"),
    ],
)
def test_malformed_requests(request_, response):
    lines = served(LotkaVolterra(), request_)
    assert lines[1].startswith(response)


def test_parse_params():
    params = parse_params(["decay=[1, 2]", "gain=0.5", "label=fast"])
    assert params == dict(decay=[1, 2], gain=0.5, label="fast")
    with pytest.raises(ValueError, match="key=value"):
        parse_params(["decay"])
    with pytest.raises(ValueError, match="key=value"):
        parse_params(["=1"])


def test_main(monkeypatch, capsys):
    monkeypatch.setattr("sys.stdin", io.StringIO("STEP 1 0.5 0.0 0.1\n"))
    main(["--system", "linear", "--param", "decay=[2.0]"])
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "HELLO 1 1 1"
    assert float(lines[1]) == pytest.approx(0.5 * np.exp(-0.2), abs=1e-12)


@pytest.mark.parametrize(
    "argv",
    [
        ["--system", "pendulum"],
        ["--system", "linear", "--param", "speed=2"],
        ["--system", "linear", "--param", "decay"],
    ],
)
def test_main_bad_system(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 2
