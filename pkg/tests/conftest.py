import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one line per acceptance criterion for the terminal summary."""
    lines = getattr(request.config, "_acceptance_lines", None)
    if lines is None:
        lines = request.config._acceptance_lines = []
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(re.match(r"\d+", s.split()[1]).group()), s)):
            terminalreporter.write_line(line)
