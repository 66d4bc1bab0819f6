"""The external dynamics adapter is tested against real subprocesses: the
builtin server of dwellcert and the misbehaving services in
flow_service.py."""

import logging
import sys
from pathlib import Path

import pytest

logger = logging.getLogger(__name__)

FLOW_SERVICE = Path(__file__).with_name("flow_service.py")


@pytest.fixture(scope="session")
def lotka_volterra_command():
    """Serves the builtin Lotka-Volterra system with a = b = c = d = 1"""
    return [
        sys.executable,
        "-m",
        "dwellcert.flow_adapters.serve",
        "--system",
        "lotka_volterra",
    ]


@pytest.fixture(scope="session")
def flow_service_command():
    """Command of a service with the given behaviour (see flow_service.py)"""

    def _command(behaviour: str):
        logger.debug("Using flow service %s", behaviour)
        return [sys.executable, str(FLOW_SERVICE), behaviour]

    return _command
