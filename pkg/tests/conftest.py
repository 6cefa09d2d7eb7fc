import pytest

from helpers import fast_engine, standard_pair


@pytest.fixture
def engine():
    return fast_engine()


@pytest.fixture
def pair(engine):
    state = standard_pair(engine)
    state["engine"] = engine
    return state
