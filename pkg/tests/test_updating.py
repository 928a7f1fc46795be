import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quorumvote import (
    ABSTAIN,
    AgentId,
    GlobalState,
    StopReason,
    VoteOutcome,
    apply_vote_update,
    canonicalize_answer,
)


def outcome_from(pairs, final, qid="q"):
    votes = tuple(
        (AgentId(j, f"a{j}"), ABSTAIN if s == "." else canonicalize_answer(s)) for j, s in pairs
    )
    return VoteOutcome(
        query_id=qid,
        final_answer=canonicalize_answer(final),
        invoked=tuple(agent for agent, _ in votes),
        votes=votes,
        stop_reason=StopReason.QUORUM_REACHED,
    )


def test_agreeing_agents_gain_both_counts_and_a_vector():
    state = GlobalState.fresh(4, capacity=2, dim=3)
    vec = np.array([1.0, 0.0, 0.0])
    apply_vote_update(state, outcome_from([(0, "a"), (1, "a")], final="a"), vec)
    for j in (0, 1):
        assert (state.agents[j].c, state.agents[j].v) == (1, 1)
        assert len(state.agents[j].buffer) == 1
    for j in (2, 3):
        assert (state.agents[j].c, state.agents[j].v) == (0, 0)
        assert len(state.agents[j].buffer) == 0


def test_dissenting_agent_gains_participation_only():
    state = GlobalState.fresh(2, capacity=2, dim=3)
    apply_vote_update(state, outcome_from([(0, "a"), (1, "b")], final="a"), np.ones(3))
    assert (state.agents[1].c, state.agents[1].v) == (0, 1)
    assert len(state.agents[1].buffer) == 0


def test_abstention_counts_as_participation_never_agreement():
    state = GlobalState.fresh(2, capacity=2, dim=3)
    apply_vote_update(state, outcome_from([(0, "a"), (1, ".")], final="a"), np.ones(3))
    assert (state.agents[1].c, state.agents[1].v) == (0, 1)
    assert len(state.agents[1].buffer) == 0


def test_full_buffer_evicts_oldest_on_agreement():
    capacity = 128
    state = GlobalState.fresh(1, capacity=capacity, dim=2)
    for i in range(capacity):
        apply_vote_update(
            state, outcome_from([(0, "a")], final="a", qid=f"q{i}"), np.array([float(i), 1.0])
        )
    assert len(state.agents[0].buffer) == capacity

    apply_vote_update(
        state, outcome_from([(0, "a")], final="a", qid="qx"), np.array([999.0, 1.0])
    )
    kept = [vec[0] for vec in state.agents[0].buffer.vectors()]
    assert len(kept) == capacity
    assert kept[0] == 1.0 and kept[-1] == 999.0
    assert 0.0 not in kept


def test_non_invoked_agents_are_bit_identical():
    state = GlobalState.fresh(5, capacity=2, dim=3)
    state.agents[4].c, state.agents[4].v = 2, 3
    state.agents[4].buffer.append(np.array([0.1, 0.2, 0.3]))
    before = state.agents[4].clone()
    apply_vote_update(state, outcome_from([(0, "a"), (1, "b")], final="a"), np.ones(3))
    assert state.agents[4] == before


def test_double_application_double_counts():
    # not idempotent by design; the harness guards against repeats
    state = GlobalState.fresh(1, capacity=2, dim=3)
    outcome = outcome_from([(0, "a")], final="a")
    apply_vote_update(state, outcome, np.ones(3))
    apply_vote_update(state, outcome, np.ones(3))
    assert (state.agents[0].c, state.agents[0].v) == (2, 2)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(2, 8).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(
                st.tuples(st.integers(0, n - 1), st.sampled_from("ab.")),
                min_size=0,
                max_size=n,
                unique_by=lambda pair: pair[0],
            ),
        )
    )
)
def test_update_conservation_laws(case):
    n, pairs = case
    state = GlobalState.fresh(n, capacity=3, dim=2)
    if not pairs:
        return
    outcome = outcome_from(pairs, final="a")
    apply_vote_update(state, outcome, np.ones(2))

    assert sum(phi.v for phi in state.agents) == len(pairs)
    agreed = sum(1 for _, s in pairs if s == "a")
    assert sum(phi.c for phi in state.agents) == agreed
    assert sum(len(phi.buffer) for phi in state.agents) == agreed
    for phi in state.agents:
        assert 0 <= phi.c <= phi.v
