import numpy as np
import pytest

from loopcast.harness import PRESETS


@pytest.fixture(scope="session")
def square_params():
    return PRESETS["square"].params()


@pytest.fixture(scope="session")
def bowtie_params():
    return PRESETS["bowtie"].params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_lines(request):
    lines = []
    request.config._acceptance_lines = lines
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
