import numpy as np
import pytest

from reddiff.schedule import build_schedule


@pytest.fixture(scope="session")
def sched():
    return build_schedule(1e-4, 0.02, 1000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def t_where_snr(s, target):
    """Timestep whose SNR is closest to ``target``."""
    return int(np.argmin(np.abs(s.snr_table - target))) + 1
