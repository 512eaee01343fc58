import numpy as np
import pytest

from nafdsim.scenario import SystemConfig


@pytest.fixture(scope="session")
def default_cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def small_cfg():
    """Reduced network for fast end-to-end tests."""
    return SystemConfig(n_trau=2, n_rrau=2, n_dl_users=2, n_ul_users=2,
                        antennas_per_rau=2, rf_chains=1, n_paths=2,
                        c_dl_bpshz=8.0, c_ul_bpshz=8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
