import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from cavityaqc import CavityParams, ModelSpec, build_model, parse_ec_clauses

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"
EC6_TEXT = (DATA / "ec6.txt").read_text()

TLS_CAVITY = CavityParams(delta_c=-0.05, kappa=0.1, g=0.075)
EC_CAVITY = CavityParams(delta_c=-0.1, kappa=0.25, g=0.06)
TFIM_CAVITY = CavityParams(delta_c=-0.14, kappa=0.12, g=0.03)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def tls_model():
    return build_model(ModelSpec("TLS", 1.0, 0.1))


@pytest.fixture(scope="session")
def ec_instance():
    return parse_ec_clauses(EC6_TEXT)


@pytest.fixture(scope="session")
def ec_model(ec_instance):
    return build_model(ModelSpec("EC", 0.5, 0.25, n_qubits=6, clauses=ec_instance.clauses))


@pytest.fixture(scope="session")
def tfim_model():
    return build_model(ModelSpec("TFIM", 1.95, 1.0, n_qubits=120))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
