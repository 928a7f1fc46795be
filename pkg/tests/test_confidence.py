import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quorumvote import (
    AgentConfidence,
    GlobalState,
    Ranking,
    ScoreStrategy,
    SemanticBuffer,
    historical_reliability,
    rank_agents,
    semantic_reliability,
)


def phi_with(c, v, vectors=(), capacity=8, dim=3):
    phi = AgentConfidence(c=c, v=v, buffer=SemanticBuffer(capacity, dim))
    for vec in vectors:
        phi.buffer.append(np.asarray(vec, dtype=np.float64))
    return phi


def test_historical_reliability_examples():
    assert historical_reliability(phi_with(3, 4)) == 0.75
    assert historical_reliability(phi_with(0, 0)) == 0.5
    assert historical_reliability(phi_with(0, 0), prior=0.9) == 0.9
    assert historical_reliability(phi_with(3, 4), laplace=True) == pytest.approx(4 / 6)
    assert historical_reliability(phi_with(0, 0), laplace=True) == 0.5


def test_semantic_reliability_self_similarity_is_one():
    vec = np.array([0.6, 0.8, 0.0])
    phi = phi_with(1, 1, vectors=[vec])
    assert semantic_reliability(vec, phi) == pytest.approx(1.0)


def test_semantic_reliability_empty_buffer_returns_prior():
    phi = phi_with(0, 0)
    assert semantic_reliability(np.ones(3), phi) == 0.5
    assert semantic_reliability(np.ones(3), phi, prior=0.25) == 0.25


def test_semantic_reliability_opposite_vector_is_minus_one():
    vec = np.array([1.0, 0.0, 0.0])
    phi = phi_with(1, 1, vectors=[-vec])
    assert semantic_reliability(vec, phi) == pytest.approx(-1.0)


def test_semantic_reliability_zero_rows_count_as_zero():
    vec = np.array([1.0, 0.0, 0.0])
    phi = phi_with(2, 2, vectors=[vec, np.zeros(3)])
    assert semantic_reliability(vec, phi) == pytest.approx(0.5)


@given(
    st.lists(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3),
        min_size=1,
        max_size=8,
    ),
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3),
)
def test_semantic_reliability_stays_in_bounds(vectors, query):
    phi = phi_with(len(vectors), len(vectors), vectors=vectors)
    score = semantic_reliability(np.asarray(query), phi)
    assert -1.0 - 1e-9 <= score <= 1.0 + 1e-9


def random_state(rng, n):
    state = GlobalState.fresh(n, capacity=4, dim=3)
    for phi in state.agents:
        phi.v = int(rng.integers(0, 10))
        phi.c = int(rng.integers(0, phi.v + 1))
        for _ in range(int(rng.integers(0, 4))):
            phi.buffer.append(rng.normal(size=3))
    return state


@pytest.mark.parametrize("strategy", list(ScoreStrategy))
def test_rank_agents_permutation_and_monotonic_scores(strategy):
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(1, 12))
        state = random_state(rng, n)
        ranking = rank_agents(state, strategy, query_vec=rng.normal(size=3))
        assert sorted(ranking.order) == list(range(n))
        assert all(a >= b for a, b in zip(ranking.scores, ranking.scores[1:]))


def test_rank_agents_breaks_ties_by_agent_index():
    state = GlobalState.fresh(4, capacity=2, dim=2)
    ranking = rank_agents(state, ScoreStrategy.HISTORICAL)
    assert ranking.order == (0, 1, 2, 3)
    assert ranking.scores == (0.5, 0.5, 0.5, 0.5)


def test_rank_agents_orders_by_track_record():
    state = GlobalState.fresh(3, capacity=2, dim=2)
    state.agents[0].c, state.agents[0].v = 1, 4   # 0.25
    state.agents[1].c, state.agents[1].v = 4, 4   # 1.0
    state.agents[2].c, state.agents[2].v = 2, 4   # 0.5
    ranking = rank_agents(state, ScoreStrategy.HISTORICAL)
    assert ranking.order == (1, 2, 0)


def test_rank_agents_semantic_requires_query_vector():
    state = GlobalState.fresh(2, capacity=2, dim=2)
    with pytest.raises(ValueError):
        rank_agents(state, ScoreStrategy.SEMANTIC)


def test_ranking_validates_permutation_and_score_alignment():
    with pytest.raises(ValueError):
        Ranking(order=(0, 0, 1))
    with pytest.raises(ValueError):
        Ranking(order=(0, 1), scores=(1.0,))
    with pytest.raises(ValueError):
        Ranking(order=(0, 1), scores=(0.1, 0.9))
