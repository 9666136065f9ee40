"""
File contains shared fixtures and the repetition counts of the randomized suites.
"""

import os

from typing import Iterator

import numpy as np
import pytest

from app.backend.corpus import named_graph
from app.backend.graph_core import DirectedMixedGraph
from app.backend.settings import Settings

FULL_ACCEPTANCE = os.environ.get("ADMG_FULL_ACCEPTANCE") == "1"
FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def repetitions(full: int, reduced: int) -> int:
    """
    Function picks the repetition count of a randomized suite.
    :param full: count used with ADMG_FULL_ACCEPTANCE=1
    :param reduced: default count
    :return: number of repetitions
    """
    return full if FULL_ACCEPTANCE else reduced


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: randomized acceptance suites")


@pytest.fixture(autouse=True)
def reset_settings() -> Iterator[None]:
    """
    Restores the default settings after every test.
    :return: Nothing, only provides fixture.
    """
    yield
    Settings.reset()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def mixed() -> DirectedMixedGraph:
    return named_graph("mixed")


@pytest.fixture
def verma() -> DirectedMixedGraph:
    return named_graph("verma")


@pytest.fixture
def six_vertex() -> DirectedMixedGraph:
    return named_graph("six_vertex")
