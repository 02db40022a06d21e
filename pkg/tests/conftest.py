import pytest

from relaycache.topology import combination_network


@pytest.fixture(scope="session")
def comb42():
    return combination_network(4, 2)


@pytest.fixture(scope="session")
def comb62():
    return combination_network(6, 2)
