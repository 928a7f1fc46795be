"""Post-session confidence updates: participation and agreement bookkeeping."""

from __future__ import annotations

import numpy as np

from .core import Abstain, GlobalState, VoteOutcome


def apply_vote_update(state: GlobalState, outcome: VoteOutcome, query_vec: np.ndarray) -> None:
    """Fold one decided session into the shared confidence state, in place.

    Every invoked agent gains a participation mark. Agents whose answer
    matches the session's final answer also gain a correctness mark, and the
    query embedding is appended to their semantic buffer. Abstaining counts as
    participation only; agents that were never invoked are untouched.

    Call exactly once per outcome: the rule is not idempotent.
    """
    final = outcome.final_answer.canonical
    for agent, answer in outcome.votes:
        phi = state.agents[agent.index]
        phi.v += 1
        if not isinstance(answer, Abstain) and answer.canonical == final:
            phi.c += 1
            phi.buffer.append(query_vec)
