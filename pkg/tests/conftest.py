import pytest

from paraspeech.taxonomy import load_taxonomy_file

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy_file()


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
