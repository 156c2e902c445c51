from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dobcoord.errors import DimensionError
from dobcoord.model import (
    AgentModel,
    DisturbanceExosystem,
    check_detectability,
    check_rank_condition,
    composite_pair,
    mass_damper_spring,
    validate_scenario_models,
)


def test_mass_damper_spring_lifts_disturbance_row():
    a = mass_damper_spring(1, 1, [1, 0])
    assert np.array_equal(a.A, [[0, 1], [-1, -1]])
    assert np.array_equal(a.E, [[0, 0], [1, 0]])
    assert (a.n, a.m, a.l, a.q) == (2, 1, 1, 2)


def test_agent_dimension_errors():
    with pytest.raises(DimensionError):
        AgentModel(np.eye(2), np.ones((3, 1)), [[1, 0]], [[0]], np.zeros((2, 0)))
    with pytest.raises(DimensionError):
        AgentModel(np.ones((2, 3)), np.ones((2, 1)), [[1, 0]], [[0]], np.zeros((2, 0)))


def test_detectability_examples(paper_agents, paper_disturbances):
    Cc, Ac = composite_pair(paper_agents[0], paper_disturbances[0])
    assert check_detectability(Cc, Ac)
    assert check_detectability([[1, 0]], [[0, 1], [0, 0]])
    assert not check_detectability([[0]], [[0]])
    assert check_detectability([[0]], [[-1]])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_detectability_similarity_invariant(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    A = rng.normal(size=(n, n))
    C = rng.normal(size=(1, n))
    if rng.random() < 0.5:
        C[:, -1] = 0.0
        A[-1, :-1] = 0.0  # last mode invisible through C
        A[:-1, -1] = rng.normal(size=n - 1)
    T = rng.normal(size=(n, n)) + 3 * np.eye(n)
    Ti = np.linalg.inv(T)
    assert check_detectability(C, A) == check_detectability(C @ Ti, T @ A @ Ti)


def test_rank_condition_examples(paper_agents):
    assert check_rank_condition(paper_agents[0], [1j, -1j])
    assert check_rank_condition(paper_agents[1], [0.0])
    blind = AgentModel([[0, 1], [0, 0]], np.zeros((2, 1)), [[1, 0]], [[0]], np.zeros((2, 0)))
    assert not check_rank_condition(blind, [0.0])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5), st.floats(-2, 2))
def test_rank_condition_output_scaling(scale, lam):
    a = mass_damper_spring(1, 1, [1, 0])
    b = replace(a, C=scale * a.C, D=scale * a.D)
    assert check_rank_condition(a, [lam, 1j]) == check_rank_condition(b, [lam, 1j])


def test_paper_scenario_is_valid(paper_agents, paper_disturbances, leader):
    report = validate_scenario_models(paper_agents, paper_disturbances, leader)
    assert report.issues == []


def test_unstabilizable_agent_reported(paper_agents, paper_disturbances, leader):
    broken = replace(paper_agents[1], B=np.zeros((2, 1)))
    report = validate_scenario_models((paper_agents[0], broken, paper_agents[2]), paper_disturbances, leader)
    assert [(i.agent, i.check) for i in report.errors] == [(2, "stabilizability")]


def test_stable_disturbance_is_a_warning(paper_agents, paper_disturbances, leader):
    dists = (paper_disturbances[0], DisturbanceExosystem([[-1]]), paper_disturbances[2])
    report = validate_scenario_models(paper_agents, dists, leader)
    assert report.ok
    assert [(i.agent, i.check) for i in report.warnings] == [(2, "exosystem-eigenvalues")]


def test_undetectable_disturbance_reported(paper_agents, paper_disturbances, leader):
    # disturbance that never reaches the plant cannot be estimated
    hidden = replace(paper_agents[1], E=np.zeros((2, 1)))
    report = validate_scenario_models((paper_agents[0], hidden, paper_agents[2]), paper_disturbances, leader)
    assert [(i.agent, i.check) for i in report.errors] == [(2, "detectability")]


def test_dimension_mismatch_reported(paper_agents, paper_disturbances, leader):
    report = validate_scenario_models(paper_agents, paper_disturbances[:2], leader)
    assert not report.ok and report.errors[0].check == "dimensions"
