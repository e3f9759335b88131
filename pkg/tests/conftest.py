import numpy as np
import pytest

from anisonet.config import GridSpec, NetworkConfig, NeuronParams


@pytest.fixture
def small_cfg():
    """20x20 / 10x10 network: 20 excitatory and 5 inhibitory targets per source."""
    return NetworkConfig(grid=GridSpec(20, 10), sigma_exc=4.0, sigma_inh=3.0,
                         input_origin=(5, 5))


@pytest.fixture
def params64():
    return NeuronParams(weight_multiplier=64.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects the PASS/FAIL lines of the acceptance suite for the summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
