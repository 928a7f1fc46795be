"""Incremental vote sessions: quorum threshold, rank-ordered tallying, early stop.

A session invokes agents in ranking order, starting with a batch of tau (the
majority threshold) and then one agent at a time, stopping the moment any
answer accumulates tau votes. If the pool is exhausted without a quorum, the
plurality rule over the collected votes decides.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Protocol, Sequence

from .confidence import Ranking
from .core import (
    Abstain,
    AgentId,
    Answer,
    Query,
    QuorumVoteError,
    StopReason,
    VoteOutcome,
)


class VotingError(QuorumVoteError):
    """Base class for vote-session protocol violations."""


class OutOfOrderVoteError(VotingError):
    """A vote arrived from an agent other than the next one in ranking order."""


class DuplicateVoteError(VotingError):
    """An agent that already voted in this session voted again."""


class SessionClosedError(VotingError):
    """A vote arrived after the session was decided or exhausted."""


class AllAbstainedError(VotingError):
    """Every invoked agent abstained; there is no answer to aggregate."""


def majority_threshold(n: int) -> int:
    """Minimum vote count that guarantees a strict majority in a pool of n.

    Equals ceil((n+1)/2): no set of the remaining n - tau agents can form an
    equal or larger bloc.
    """
    if n < 1:
        raise ValueError(f"pool size must be >= 1, got {n}")
    return n // 2 + 1


class SessionStatus(Enum):
    COLLECTING = "collecting"
    DECIDED = "decided"
    EXHAUSTED = "exhausted"


@dataclass
class VoteSession:
    """Mutable per-query voting state; one writer, consumed by run_session.

    Invariants: counts is the exact tally of non-abstain votes, votes appear in
    ranking order, and status is DECIDED exactly when some answer holds at
    least tau votes.
    """

    query_id: str
    ranking: Ranking
    tau: int = field(init=False)
    votes: list[tuple[AgentId, Answer | Abstain]] = field(init=False, default_factory=list)
    counts: Counter[str] = field(init=False, default_factory=Counter)
    status: SessionStatus = field(init=False, default=SessionStatus.COLLECTING)
    decided: Answer | None = field(init=False, default=None)
    _nonabstain: int = field(init=False, default=0)
    _seen: set[int] = field(init=False, default_factory=set)

    def __post_init__(self) -> None:
        self.tau = majority_threshold(len(self.ranking))

    @property
    def pool_size(self) -> int:
        return len(self.ranking)

    def remaining(self) -> int:
        return self.pool_size - len(self.votes)

    def quorum_impossible(self) -> bool:
        """True when no answer can still accumulate tau votes."""
        best = max(self.counts.values(), default=0)
        return best + self.remaining() < self.tau

    def abandon_remaining(self) -> None:
        """End the session early; legal only once a quorum is provably out of reach."""
        if self.status is not SessionStatus.COLLECTING:
            raise SessionClosedError(f"session for {self.query_id!r} is already {self.status.value}")
        if len(self.votes) < self.tau or not self.quorum_impossible():
            raise VotingError("cannot abandon a session that could still reach a quorum")
        self.status = SessionStatus.EXHAUSTED


def submit_vote(session: VoteSession, agent: AgentId, answer: Answer | Abstain) -> SessionStatus:
    """Tally one vote from the next agent in ranking order and update status.

    The session becomes DECIDED as soon as any answer holds tau votes,
    EXHAUSTED when the pool is used up, and also EXHAUSTED early when so many
    agents abstained that tau non-abstain votes can no longer materialize
    (checked only once tau agents were invoked, keeping invoked_count >= tau).
    """
    if session.status is not SessionStatus.COLLECTING:
        raise SessionClosedError(
            f"session for {session.query_id!r} is already {session.status.value}"
        )
    if agent.index in session._seen:
        raise DuplicateVoteError(f"agent {agent.index} already voted in {session.query_id!r}")
    expected = session.ranking.order[len(session.votes)]
    if agent.index != expected:
        raise OutOfOrderVoteError(
            f"expected agent {expected} at rank {len(session.votes) + 1}, got {agent.index}"
        )

    session.votes.append((agent, answer))
    session._seen.add(agent.index)
    if not isinstance(answer, Abstain):
        session._nonabstain += 1
        canonical = answer.canonical
        session.counts[canonical] += 1
        if session.counts[canonical] >= session.tau:
            session.status = SessionStatus.DECIDED
            session.decided = answer
            return session.status
    if len(session.votes) == session.pool_size:
        session.status = SessionStatus.EXHAUSTED
    elif (
        len(session.votes) >= session.tau
        and session._nonabstain + session.remaining() < session.tau
    ):
        session.status = SessionStatus.EXHAUSTED
    return session.status


def plurality_winner(votes: Iterable[tuple[AgentId, Answer | Abstain]]) -> Answer:
    """Most frequent answer among non-abstain votes.

    Count ties break toward the answer whose earliest supporter has the lowest
    pool index, which depends only on who voted what - never on invocation
    order - so every strategy resolves a tied tally identically.
    """
    counts: Counter[str] = Counter()
    min_agent: dict[str, int] = {}
    carrier: dict[str, Answer] = {}
    for agent, answer in votes:
        if isinstance(answer, Abstain):
            continue
        canonical = answer.canonical
        counts[canonical] += 1
        if canonical not in min_agent or agent.index < min_agent[canonical]:
            min_agent[canonical] = agent.index
            carrier[canonical] = answer
    if not counts:
        raise AllAbstainedError("no non-abstain votes to aggregate")
    winner = min(counts, key=lambda c: (-counts[c], min_agent[c]))
    return carrier[winner]


def weighted_winner(
    votes: Iterable[tuple[AgentId, Answer | Abstain]], weights: Sequence[float]
) -> Answer:
    """Answer with the largest total supporter weight (weights indexed by pool position).

    Exact weight ties break like plurality ties: lowest pool index of the
    earliest supporter. With uniform weights this reduces to plurality_winner.
    """
    totals: dict[str, float] = {}
    min_agent: dict[str, int] = {}
    carrier: dict[str, Answer] = {}
    for agent, answer in votes:
        if isinstance(answer, Abstain):
            continue
        canonical = answer.canonical
        totals[canonical] = totals.get(canonical, 0.0) + weights[agent.index]
        if canonical not in min_agent or agent.index < min_agent[canonical]:
            min_agent[canonical] = agent.index
            carrier[canonical] = answer
    if not totals:
        raise AllAbstainedError("no non-abstain votes to aggregate")
    winner = min(totals, key=lambda c: (-totals[c], min_agent[c]))
    return carrier[winner]


def finalize_plurality(session: VoteSession) -> Answer:
    """Resolve an exhausted session with the plurality rule."""
    if session.status is not SessionStatus.EXHAUSTED:
        raise VotingError(
            f"plurality fallback requires an exhausted session, status is {session.status.value}"
        )
    return plurality_winner(session.votes)


class AnswerSource(Protocol):
    """Anything that can produce an answer (or abstain) for a query."""

    agent: AgentId

    def invoke(self, query: Query) -> Answer | Abstain: ...


def run_session(
    query: Query,
    ranking: Ranking,
    backends: Sequence[AnswerSource],
    *,
    parallel: int = 1,
    prune_impossible: bool = False,
) -> VoteOutcome:
    """Drive one query through the full vote session and return its outcome.

    The first tau backends (in ranking order) are dispatched as the initial
    batch - concurrently when parallel > 1 - but always tallied strictly in
    rank order, so outcomes are identical to sequential execution. Further
    agents are invoked one at a time until quorum or exhaustion.

    prune_impossible stops invoking once no answer can reach tau anymore; this
    saves calls but falls back to a plurality over the prefix instead of the
    full pool, so it is off by default.
    """
    n = len(backends)
    if len(ranking) != n:
        raise ValueError(f"ranking covers {len(ranking)} agents, pool has {n}")
    for j, backend in enumerate(backends):
        if backend.agent.index != j:
            raise ValueError(f"backend at position {j} claims agent index {backend.agent.index}")

    session = VoteSession(query.id, ranking)
    batch = ranking.order[: session.tau]
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=min(parallel, len(batch))) as pool:
            answers = list(pool.map(lambda j: backends[j].invoke(query), batch))
    else:
        answers = [backends[j].invoke(query) for j in batch]
    for j, answer in zip(batch, answers):
        submit_vote(session, backends[j].agent, answer)

    while session.status is SessionStatus.COLLECTING:
        if prune_impossible and session.quorum_impossible():
            session.abandon_remaining()
            break
        j = ranking.order[len(session.votes)]
        submit_vote(session, backends[j].agent, backends[j].invoke(query))

    if session.status is SessionStatus.DECIDED:
        assert session.decided is not None
        final, reason = session.decided, StopReason.QUORUM_REACHED
    else:
        final, reason = finalize_plurality(session), StopReason.PLURALITY_FALLBACK
    return VoteOutcome(
        query_id=query.id,
        final_answer=final,
        invoked=tuple(agent for agent, _ in session.votes),
        votes=tuple(session.votes),
        stop_reason=reason,
    )


def outcome_audit_records(outcome: VoteOutcome) -> list[dict]:
    """Per-vote trace records for the line-delimited audit log."""
    records = []
    for rank, (agent, answer) in enumerate(outcome.votes, start=1):
        abstained = isinstance(answer, Abstain)
        records.append(
            {
                "query_id": outcome.query_id,
                "rank": rank,
                "agent_id": agent.index,
                "answer": None if abstained else answer.canonical,
                "abstain": abstained,
                "decided_after": outcome.invoked_count,
            }
        )
    return records
