from pathlib import Path

import pytest
from hypothesis import settings

from approxde import parse_model

# sympy oracles are slow; examples are still bounded per test
settings.register_profile("default", deadline=None)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
RUNNING = ROOT / "models" / "running_example.model"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def running_text():
    return RUNNING.read_text()


@pytest.fixture(scope="session")
def running(running_text):
    return parse_model(running_text)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
