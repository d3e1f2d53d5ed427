import pytest

from translink.translit import default_syllable_map


@pytest.fixture(scope="session")
def smap():
    return default_syllable_map()
