import numpy as np
import pytest

from epinet_tools.data.types import EpidemicData, TransmissionTree, Priors, NetworkOrder
from epinet_tools.epidemic.simulate import simulate_si
from epinet_tools.network.generate import generate_pa_network


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help="Run the long statistical checks.")


def pytest_configure(config):
    config.addinivalue_line('markers', "slow: long statistical check, only run with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)


@pytest.fixture
def priors() -> Priors:
    return Priors()


@pytest.fixture
def small_data() -> EpidemicData:
    # 1 infects 2 and 3, 2 infects 4 (0-based: 0 -> 1, 0 -> 2, 1 -> 3)
    return EpidemicData(
        times=np.array([0.0, 1.0, 2.0, 3.5]),
        tree=TransmissionTree.from_infectors([-1, 0, 0, 1]),
    )


def simulate_data(m: int, beta: float, mu: float, gamma: float, seed: int):
    """Simulated PA network and SI epidemic, in epidemic labels."""
    rng = np.random.default_rng(seed)
    g, _ = generate_pa_network(m, mu, gamma, NetworkOrder(rng.permutation(m)), rng)
    return simulate_si(g, beta, rng)


@pytest.fixture
def simulated_10():
    return simulate_data(m=10, beta=0.4, mu=3.0, gamma=0.0, seed=7)
