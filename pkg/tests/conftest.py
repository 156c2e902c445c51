import numpy as np
import pytest

from dobcoord import paper_example, synthesize
from dobcoord.graph import CommGraph
from dobcoord.model import DisturbanceExosystem, LeaderExosystem, mass_damper_spring

GRAPH_A_EDGES = [(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (0, 3, 1.0)]
GRAPH_B_EDGES = [(0, 1, 1.0), (0, 2, 1.0), (2, 3, 1.0), (3, 2, 1.0)]

# published gains, one dict per follower
PUBLISHED_GAINS = [
    dict(K1=[[0, 0]], K2=[[-1, 0]], K3=[[0, 1]], L1=[[-1.9813], [-1.4628]], L2=[[-3.1445], [-1.0]],
         L=[[0, -1], [0, -1]]),
    dict(K1=[[-1, 0]], K2=[[-1]], K3=[[0, 1]], L1=[[-1.7321], [-1.0]], L2=[[-1.0]], L=[[0, -1]]),
    dict(K1=[[0, -1]], K2=[[-1, 0]], K3=[[0, 1]], L1=[[-2.1607], [-1.8343]], L2=[[-0.8860], [1.1023]],
         L=[[0, -1], [0, 0]]),
]
PUBLISHED_L0 = np.array([[-1.3522], [-0.4142]])


@pytest.fixture(scope="session")
def graph_a():
    return CommGraph.from_edges(3, GRAPH_A_EDGES)


@pytest.fixture(scope="session")
def graph_b():
    return CommGraph.from_edges(3, GRAPH_B_EDGES)


@pytest.fixture(scope="session")
def leader():
    return LeaderExosystem([[0, 1], [-1, 0]], [[1, 0]], [0, 1])


@pytest.fixture(scope="session")
def paper_agents():
    return (
        mass_damper_spring(1, 1, [1, 0]),
        mass_damper_spring(0, 1, [1]),
        mass_damper_spring(1, 0, [1, 0]),
    )


@pytest.fixture(scope="session")
def paper_disturbances():
    return (
        DisturbanceExosystem([[0, 1], [0, 0]]),
        DisturbanceExosystem([[0]]),
        DisturbanceExosystem([[0, 1], [-1, 0]]),
    )


@pytest.fixture(scope="session")
def scenario():
    return paper_example()


@pytest.fixture(scope="session")
def published_gains(scenario):
    return synthesize(scenario.agents, scenario.disturbances, scenario.leader, scenario.graphs,
                      scenario.overrides)


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, title, ok, detail=""):
    """Remember one acceptance outcome for the end-of-run summary; returns ``ok``."""
    ACCEPTANCE[number] = (title, bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}  {detail}".rstrip())
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number}. {title}  {detail}".rstrip())
