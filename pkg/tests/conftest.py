import pytest

from tablekb.config import default_config
from tablekb.graph import HashEmbedder


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def embedder():
    return HashEmbedder(16)
