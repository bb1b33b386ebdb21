import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def fixture_path(name, env=None):
    """Path of a data fixture, optionally overridden by an environment variable."""
    if env and os.environ.get(env):
        return Path(os.environ[env])
    return FIXTURES / name


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: int(s.split()[1][:-1])):
            terminalreporter.write_line(line)
