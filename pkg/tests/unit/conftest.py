import pytest

from dwellcert.core.registry import register_system
from dwellcert.systems.linear import Linear


class TestUtils:
    """Any functions needed to be "imported" anywhere from any tests. Available
    as a fixture called `testutils`.
    """

    @staticmethod
    def empty_system_registry(monkeypatch):
        """
        Make the system registry empty for duration of a test. Keep
        the Linear system in the registry.
        """
        monkeypatch.setattr("dwellcert.core.registry._system_registry", (dict()))
        # Configs used in tests refer to the linear system.
        register_system(Linear)


@pytest.fixture(scope="session")
def testutils():
    return TestUtils


@pytest.fixture(scope="function", name="empty_system_registry")
def empty_system_registry_fixture(monkeypatch):
    TestUtils.empty_system_registry(monkeypatch)


@pytest.fixture(scope="function", name="DWELLCERT_WORKERS_eq_2")
def _dwellcert_workers_fixture(monkeypatch):
    monkeypatch.setenv("DWELLCERT_WORKERS", "2")
