import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from edgesketch.graphgen import OracleGraph, SbmConfig, sbm_generate

TRIANGLE = [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)]
TWO_TRIANGLES = TRIANGLE + [(4, 5, 1.0), (5, 6, 1.0), (4, 6, 1.0)]


@pytest.fixture
def triangle():
    return np.array(TRIANGLE)


@pytest.fixture
def two_triangles():
    return np.array(TWO_TRIANGLES)


@pytest.fixture
def two_triangles_graph():
    return OracleGraph.from_edges(TWO_TRIANGLES)


@pytest.fixture(scope="session")
def desk_sbm():
    """n=400, b=4, p=0.4, q=0.01 with unit weights."""
    return sbm_generate(SbmConfig(400, 4, 0.4, 0.01, "unit", 0))


@pytest.fixture(scope="session")
def small_sbm():
    """n=200, b=4, p=0.3, q=0.02 with Exp(1) weights."""
    cfg = SbmConfig(200, 4, 0.3, 0.02, "exp", 0)
    return cfg, *sbm_generate(cfg)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
