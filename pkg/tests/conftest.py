import pytest

from geolab.geodesics import Alphabet
from geolab.hurwitz import build_partition
from geolab.subshift import build_transitions


@pytest.fixture(scope="session")
def partition4():
    return build_partition(4)


@pytest.fixture(scope="session")
def transitions4(partition4):
    return build_transitions(partition4, certify=True)


@pytest.fixture(scope="session")
def alphabet4(partition4):
    return Alphabet(partition4)


@pytest.fixture(scope="session")
def partition5():
    return build_partition(5)


@pytest.fixture(scope="session")
def transitions5(partition5):
    return build_transitions(partition5, certify=True)


@pytest.fixture(scope="session")
def partition6():
    return build_partition(6)


@pytest.fixture(scope="session")
def transitions6(partition6):
    return build_transitions(partition6)
