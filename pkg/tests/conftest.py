import numpy as np
import pytest

from relzk.config import get_settings
from relzk.graph import Graph, build_instance, demo_instance
from relzk.seeds import HARDNESS_SEEDS, K4


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Every test starts from default settings with the run ledger off"""
    for name in (
        "RELZK_LEDGER_URL",
        "RELZK_ENUMERATION_LIMIT",
        "RELZK_BLOCK_SIZE",
        "RELZK_ORACLE_MAX_VERTICES",
        "RELZK_CONSTRUCTION_RETRIES",
    ):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def demo():
    return demo_instance()


@pytest.fixture
def k4():
    return K4


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def single_edge():
    return Graph.from_edges(2, [(0, 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def hundred_vertex_instance():
    return build_instance(HARDNESS_SEEDS, 100, np.random.default_rng(2024))
