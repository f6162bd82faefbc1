import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "spinmech", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("spinmech")


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_density(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    r = a @ a.conj().T
    return r / np.trace(r).real


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
