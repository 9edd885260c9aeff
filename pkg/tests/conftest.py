import numpy as np
import pytest

from wiretap_ot.channel import ChannelParams
from wiretap_ot.protocol import ProtocolConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_config():
    """Case-1 instance that runs in a few milliseconds."""
    return ProtocolConfig.from_rate_fraction(3000, 0.8, ChannelParams(0.5, 0.9, 0.4), seed=7)


@pytest.fixture(scope="session")
def debc_small():
    return ProtocolConfig.from_rate_fraction(3000, 0.8, ChannelParams(0.5, 1.0, 0.4), seed=8)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
