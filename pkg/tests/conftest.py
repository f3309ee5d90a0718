import numpy as np
import pytest

from exotic_spin_lab import presets
from exotic_spin_lab.amplifier import AmplifierParams
from exotic_spin_lab.config import default_config


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def amp():
    return AmplifierParams.calibrated()


@pytest.fixture(scope="session")
def bgo():
    return presets.bgo_source()


@pytest.fixture(scope="session")
def rod():
    return presets.rod_source()


@pytest.fixture(scope="session")
def cw():
    return presets.default_rotation("CW")


@pytest.fixture(scope="session")
def ccw():
    return presets.default_rotation("CCW")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number, name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} [{number:>2}] {name}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return report


_ACCEPTANCE = pytest.StashKey()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda x: x[0]):
            terminalreporter.write_line(line)
