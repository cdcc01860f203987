import pathlib

import pytest

from swigid.graph import parse_graph

GRAPH_DIR = pathlib.Path(__file__).parent / "graphs"


def load_graph(name):
    return parse_graph((GRAPH_DIR / f"{name}.g").read_text())


CORPUS = sorted(p.stem for p in GRAPH_DIR.glob("*.g"))


@pytest.fixture
def graphs():
    return {name: load_graph(name) for name in CORPUS}


@pytest.fixture
def backdoor():
    return load_graph("backdoor")


@pytest.fixture
def frontdoor():
    return load_graph("frontdoor")


@pytest.fixture
def frontdoor_admg():
    return load_graph("frontdoor_admg")


@pytest.fixture
def twoeffects():
    return load_graph("twoeffects")


@pytest.fixture
def torpedo():
    return load_graph("torpedo")


@pytest.fixture
def torpedo_admg():
    return load_graph("torpedo_admg")


@pytest.fixture
def napkin():
    return load_graph("napkin")


@pytest.fixture
def bow():
    return load_graph("bow")
