"""Experiment harness: dataset ingestion, strategy registry, metrics, oracle.

Every strategy in a run consumes the same answers (same backends, and
simulated answers depend only on seed, agent, and query), so accuracy and
invocation-count differences between strategies come from scheduling alone.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .agents import derive_rng
from .confidence import (
    DEFAULT_COLD_START_PRIOR,
    Ranking,
    ScoreStrategy,
    historical_reliability,
    rank_agents,
)
from .core import (
    DEFAULT_BUFFER_CAPACITY,
    DEFAULT_EMBEDDING_DIM,
    ConfigError,
    GlobalState,
    Query,
    StopReason,
    VoteOutcome,
    canonicalize_answer,
)
from .embedding import EmbeddingCache, HashingEncoder
from .updating import apply_vote_update
from .voting import (
    AnswerSource,
    majority_threshold,
    outcome_audit_records,
    plurality_winner,
    run_session,
    weighted_winner,
)


class StrategyKind(Enum):
    SIMPLE_MV = "simple-mv"
    WEIGHTED_MV = "weighted-mv"
    RANDOM_ES = "random-es"
    FIXED_RANDOM_K = "fixed-random"
    FIXED_TOP_K = "fixed-top"
    RANKED_HISTORICAL = "ems-rel"
    RANKED_SEMANTIC = "ems-sim"


_FIXED_K_KINDS = {StrategyKind.FIXED_RANDOM_K, StrategyKind.FIXED_TOP_K}
_QUORUM_KINDS = {StrategyKind.RANDOM_ES, StrategyKind.RANKED_HISTORICAL, StrategyKind.RANKED_SEMANTIC}
_UPDATING_KINDS = {StrategyKind.WEIGHTED_MV, StrategyKind.RANKED_HISTORICAL, StrategyKind.RANKED_SEMANTIC}


@dataclass(frozen=True)
class Strategy:
    """One voting strategy to benchmark; fixed-budget kinds carry their k."""

    kind: StrategyKind
    k: int | None = None

    def __post_init__(self) -> None:
        if self.kind in _FIXED_K_KINDS:
            if self.k is None or self.k < 1:
                raise ConfigError(f"strategy {self.kind.value} needs a positive agent budget k")
        elif self.k is not None:
            raise ConfigError(f"strategy {self.kind.value} takes no agent budget")

    @property
    def name(self) -> str:
        if self.k is not None:
            return f"{self.kind.value}-{self.k}"
        return self.kind.value

    @property
    def quorum_based(self) -> bool:
        """Uses incremental invocation with early stopping at the majority threshold."""
        return self.kind in _QUORUM_KINDS

    @property
    def updates_state(self) -> bool:
        """Feeds session outcomes back into the shared confidence state."""
        return self.kind in _UPDATING_KINDS


_FIXED_K_RE = re.compile(r"^(fixedrandom|fixedtop)k?\(?(\d+)\)?$")

_PLAIN_TOKENS = {
    "simplemv": StrategyKind.SIMPLE_MV,
    "weightedmv": StrategyKind.WEIGHTED_MV,
    "randomes": StrategyKind.RANDOM_ES,
    "emsrel": StrategyKind.RANKED_HISTORICAL,
    "emssim": StrategyKind.RANKED_SEMANTIC,
}


def parse_strategy(token: str) -> Strategy:
    """Parse a strategy token; separators and case are ignored.

    Accepts e.g. "simple-mv", "SimpleMV", "ems-rel", "EMS_Rel",
    "fixed-random-5", "FixedRandomK(5)", "fixed-top-3".
    """
    normalized = re.sub(r"[\s_\-]+", "", token.strip().lower())
    if normalized in _PLAIN_TOKENS:
        return Strategy(kind=_PLAIN_TOKENS[normalized])
    match = _FIXED_K_RE.match(normalized)
    if match:
        kind = (
            StrategyKind.FIXED_RANDOM_K
            if match.group(1) == "fixedrandom"
            else StrategyKind.FIXED_TOP_K
        )
        return Strategy(kind=kind, k=int(match.group(2)))
    raise ConfigError(f"unknown strategy token {token!r}")


def parse_strategies(tokens: Sequence[str]) -> tuple[Strategy, ...]:
    strategies = tuple(parse_strategy(token) for token in tokens)
    names = [s.name for s in strategies]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate strategies in {list(tokens)}")
    if not strategies:
        raise ConfigError("at least one strategy is required")
    return strategies


@dataclass(frozen=True)
class RunSettings:
    """Everything that determines an experiment's results, plus execution knobs.

    parallel only changes how the initial batch is dispatched, never any
    output, so it is excluded from the effective config and its digest.
    """

    strategies: tuple[Strategy, ...]
    seed: int
    capacity: int = DEFAULT_BUFFER_CAPACITY
    dim: int = DEFAULT_EMBEDDING_DIM
    prior: float = DEFAULT_COLD_START_PRIOR
    laplace: bool = False
    numeric: bool = False
    parallel: int = 1
    prune_impossible: bool = False


@dataclass(frozen=True)
class QueryRecord:
    """Per-query outcome summary; order is the full intended invocation order."""

    query_id: str
    final_answer: str
    correct: bool | None
    invoked_count: int
    stop_reason: str
    order: tuple[int, ...]


@dataclass
class StrategyResult:
    name: str
    accuracy: float | None
    avg_agents: float
    per_query: list[QueryRecord]
    audit: list[dict]
    final_state: GlobalState | None


@dataclass
class ExperimentReport:
    seed: int
    config_digest: str
    settings: dict
    strategies: dict[str, StrategyResult]


def load_dataset(path: str | Path, *, numeric: bool = False) -> list[Query]:
    """Read line-delimited query records {id, text, gold?, topic?}."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read dataset from {path}: {exc}") from exc
    queries: list[Query] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise ConfigError(f"{path}:{lineno}: query record must be an object")
        qid, qtext = record.get("id"), record.get("text")
        if not isinstance(qid, str) or not qid:
            raise ConfigError(f"{path}:{lineno}: 'id' must be a non-empty string")
        if not isinstance(qtext, str):
            raise ConfigError(f"{path}:{lineno}: 'text' must be a string")
        if qid in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate query id {qid!r}")
        seen.add(qid)
        gold_raw = record.get("gold")
        if gold_raw is not None and not isinstance(gold_raw, str):
            raise ConfigError(f"{path}:{lineno}: 'gold' must be a string when present")
        topic = record.get("topic")
        if topic is not None and not isinstance(topic, str):
            raise ConfigError(f"{path}:{lineno}: 'topic' must be a string when present")
        gold = canonicalize_answer(gold_raw, numeric=numeric) if gold_raw is not None else None
        queries.append(Query(id=qid, text=qtext, gold=gold, topic=topic))
    if not queries:
        raise ConfigError(f"dataset {path} holds no queries")
    return queries


def compute_metrics(per_query: Sequence[QueryRecord]) -> tuple[float | None, float]:
    """(accuracy over gold-labeled queries or None if there are none, mean invoked)."""
    if not per_query:
        raise ValueError("no per-query records to aggregate")
    labeled = [record for record in per_query if record.correct is not None]
    accuracy = sum(record.correct for record in labeled) / len(labeled) if labeled else None
    avg_agents = sum(record.invoked_count for record in per_query) / len(per_query)
    return accuracy, avg_agents


def config_digest(settings_dict: dict) -> str:
    """Stable digest of the effective run configuration."""
    blob = json.dumps(settings_dict, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _effective_settings(
    settings: RunSettings, n_agents: int, n_queries: int, warm_start: bool
) -> dict:
    return {
        "strategies": [s.name for s in settings.strategies],
        "seed": settings.seed,
        "n_agents": n_agents,
        "n_queries": n_queries,
        "capacity": settings.capacity,
        "dim": settings.dim,
        "prior": settings.prior,
        "laplace": settings.laplace,
        "numeric_answers": settings.numeric,
        "prune_impossible": settings.prune_impossible,
        "warm_start": warm_start,
    }


def _ranking_for(
    strategy: Strategy,
    query: Query,
    state: GlobalState,
    settings: RunSettings,
    cache: EmbeddingCache,
    n: int,
) -> Ranking:
    kind = strategy.kind
    if kind in (StrategyKind.SIMPLE_MV, StrategyKind.WEIGHTED_MV):
        return Ranking(order=tuple(range(n)))
    if kind in (StrategyKind.RANDOM_ES, StrategyKind.FIXED_RANDOM_K):
        rng = derive_rng(settings.seed, "order", strategy.name, query.id)
        order = list(range(n))
        rng.shuffle(order)
        return Ranking(order=tuple(order))
    if kind in (StrategyKind.RANKED_HISTORICAL, StrategyKind.FIXED_TOP_K):
        return rank_agents(
            state, ScoreStrategy.HISTORICAL, prior=settings.prior, laplace=settings.laplace
        )
    if kind is StrategyKind.RANKED_SEMANTIC:
        return rank_agents(state, ScoreStrategy.SEMANTIC, cache.get(query), prior=settings.prior)
    raise AssertionError(f"unhandled strategy kind {kind}")


def _full_pool_outcome(
    query: Query,
    ranking: Ranking,
    backends: Sequence[AnswerSource],
    weights: Sequence[float] | None,
) -> VoteOutcome:
    votes = tuple((backends[j].agent, backends[j].invoke(query)) for j in ranking.order)
    final = plurality_winner(votes) if weights is None else weighted_winner(votes, weights)
    return VoteOutcome(
        query_id=query.id,
        final_answer=final,
        invoked=tuple(agent for agent, _ in votes),
        votes=votes,
        stop_reason=StopReason.PLURALITY_FALLBACK,
    )


def _truncated_outcome(
    query: Query, ranking: Ranking, backends: Sequence[AnswerSource], k: int
) -> VoteOutcome:
    votes = tuple((backends[j].agent, backends[j].invoke(query)) for j in ranking.order[:k])
    return VoteOutcome(
        query_id=query.id,
        final_answer=plurality_winner(votes),
        invoked=tuple(agent for agent, _ in votes),
        votes=votes,
        stop_reason=StopReason.TRUNCATED,
    )


def _execute(
    strategy: Strategy,
    query: Query,
    ranking: Ranking,
    backends: Sequence[AnswerSource],
    state: GlobalState,
    settings: RunSettings,
) -> VoteOutcome:
    if strategy.quorum_based:
        return run_session(
            query,
            ranking,
            backends,
            parallel=settings.parallel,
            prune_impossible=settings.prune_impossible,
        )
    if strategy.kind is StrategyKind.SIMPLE_MV:
        return _full_pool_outcome(query, ranking, backends, weights=None)
    if strategy.kind is StrategyKind.WEIGHTED_MV:
        weights = [
            historical_reliability(phi, prior=settings.prior, laplace=settings.laplace)
            for phi in state.agents
        ]
        return _full_pool_outcome(query, ranking, backends, weights=weights)
    assert strategy.k is not None
    return _truncated_outcome(query, ranking, backends, strategy.k)


def run_experiment(
    queries: Sequence[Query],
    backends: Sequence[AnswerSource],
    settings: RunSettings,
    *,
    initial_state: GlobalState | None = None,
) -> ExperimentReport:
    """Run every strategy over the dataset and aggregate metrics.

    Each strategy starts from its own clone of the same initial confidence
    state, iterates queries in dataset order, and (for state-updating
    strategies) folds each outcome back in exactly once before the next query.
    """
    n = len(backends)
    if n < 1:
        raise ConfigError("agent pool is empty")
    if not queries:
        raise ConfigError("dataset is empty")
    for strategy in settings.strategies:
        if strategy.k is not None and strategy.k > n:
            raise ConfigError(f"strategy {strategy.name}: budget exceeds pool size {n}")
    if initial_state is not None:
        if len(initial_state.agents) != n:
            raise ConfigError(
                f"state snapshot covers {len(initial_state.agents)} agents, pool has {n}"
            )
        if initial_state.agents[0].buffer.dim != settings.dim:
            raise ConfigError(
                f"state snapshot dimension {initial_state.agents[0].buffer.dim} "
                f"does not match configured dimension {settings.dim}"
            )
    base_state = (
        initial_state.clone()
        if initial_state is not None
        else GlobalState.fresh(n, capacity=settings.capacity, dim=settings.dim)
    )
    cache = EmbeddingCache(HashingEncoder(settings.dim))

    results: dict[str, StrategyResult] = {}
    for strategy in settings.strategies:
        state = base_state.clone()
        per_query: list[QueryRecord] = []
        audit: list[dict] = []
        applied: set[str] = set()
        for query in queries:
            ranking = _ranking_for(strategy, query, state, settings, cache, n)
            outcome = _execute(strategy, query, ranking, backends, state, settings)
            if strategy.updates_state:
                if query.id in applied:
                    raise AssertionError(f"update applied twice for query {query.id!r}")
                applied.add(query.id)
                apply_vote_update(state, outcome, cache.get(query))
            correct = (
                None
                if query.gold is None
                else outcome.final_answer.canonical == query.gold.canonical
            )
            per_query.append(
                QueryRecord(
                    query_id=query.id,
                    final_answer=outcome.final_answer.canonical,
                    correct=correct,
                    invoked_count=outcome.invoked_count,
                    stop_reason=outcome.stop_reason.value,
                    order=ranking.order,
                )
            )
            audit.extend(outcome_audit_records(outcome))
        accuracy, avg_agents = compute_metrics(per_query)
        results[strategy.name] = StrategyResult(
            name=strategy.name,
            accuracy=accuracy,
            avg_agents=avg_agents,
            per_query=per_query,
            audit=audit,
            final_state=state if strategy.updates_state else None,
        )

    effective = _effective_settings(settings, n, len(queries), initial_state is not None)
    return ExperimentReport(
        seed=settings.seed,
        config_digest=config_digest(effective),
        settings=effective,
        strategies=results,
    )


@dataclass
class OracleVerdict:
    """Outcome of the independent recheck; empty mismatches means pass."""

    checked: int
    mismatches: list[str]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _oracle_plurality(pairs: Sequence[tuple[int, str]]) -> str:
    """Independent plurality recount over (pool index, canonical answer) pairs."""
    counts: dict[str, int] = {}
    first: dict[str, int] = {}
    for index, answer in pairs:
        counts[answer] = counts.get(answer, 0) + 1
        if answer not in first or index < first[answer]:
            first[answer] = index
    return min(counts, key=lambda a: (-counts[a], first[a]))


def _oracle_stop(
    votes: Sequence[str | None], tau: int
) -> tuple[int, str | None]:
    """Brute-force scan for the earliest stop index over a full vote sequence.

    Returns (stop index, quorum answer or None). Mirrors the session rules by
    independent recomputation: quorum at tau votes for one answer, exhaustion
    at the end of the pool, early exhaustion when the abstention count makes a
    quorum impossible (only probed from index tau onward).
    """
    n = len(votes)
    counts: dict[str, int] = {}
    nonabstain = 0
    for t, answer in enumerate(votes, start=1):
        if answer is not None:
            nonabstain += 1
            counts[answer] = counts.get(answer, 0) + 1
            if counts[answer] >= tau:
                return t, answer
        if t == n:
            return t, None
        if t >= tau and nonabstain + (n - t) < tau:
            return t, None
    raise AssertionError("unreachable: loop always returns at t == n")


def oracle_check(
    trace: dict[tuple[str, int], str | None], report: ExperimentReport
) -> OracleVerdict:
    """Recheck a report against the raw trace by independent recomputation.

    For quorum strategies: the stop index must be the brute-force minimal one
    over the recorded order, and the final answer must match the quorum answer
    (or the prefix plurality on fallback). On abstention-free queries the
    final answer must also equal the full-pool plurality, which is what makes
    early stopping decision-equivalent to full majority voting. Fixed-budget
    strategies get their k-vote plurality checked; full-pool strategies their
    invocation count, plus the plurality itself for the unweighted one.
    """
    numeric = bool(report.settings.get("numeric_answers", False))
    n = int(report.settings["n_agents"])
    tau = majority_threshold(n)

    def vote_at(query_id: str, index: int) -> str | None:
        try:
            raw = trace[(query_id, index)]
        except KeyError:
            raise ConfigError(
                f"trace has no entry for query {query_id!r}, agent {index}"
            ) from None
        if raw is None:
            return None
        return canonicalize_answer(raw, numeric=numeric).canonical

    checked = 0
    mismatches: list[str] = []

    def flag(strategy: str, query_id: str, message: str) -> None:
        mismatches.append(f"{strategy}/{query_id}: {message}")

    for name, result in report.strategies.items():
        strategy = parse_strategy(name)
        for record in result.per_query:
            checked += 1
            qid = record.query_id
            if len(record.order) != n:
                flag(name, qid, f"recorded order covers {len(record.order)} of {n} agents")
                continue
            votes = [vote_at(qid, j) for j in record.order]
            answered = [(j, v) for j, v in zip(record.order, votes) if v is not None]

            if strategy.quorum_based:
                stop, quorum_answer = _oracle_stop(votes, tau)
                if stop != record.invoked_count:
                    flag(name, qid, f"stopped after {record.invoked_count}, expected {stop}")
                    continue
                if quorum_answer is not None:
                    if record.stop_reason != "quorum":
                        flag(name, qid, f"stop_reason {record.stop_reason}, expected quorum")
                    if record.final_answer != quorum_answer:
                        flag(name, qid, f"answer {record.final_answer!r} != quorum {quorum_answer!r}")
                else:
                    prefix = [
                        (j, v) for j, v in zip(record.order[:stop], votes[:stop]) if v is not None
                    ]
                    if record.stop_reason != "plurality":
                        flag(name, qid, f"stop_reason {record.stop_reason}, expected plurality")
                    elif not prefix:
                        flag(name, qid, "fallback with no non-abstain votes")
                    elif record.final_answer != _oracle_plurality(prefix):
                        flag(name, qid, "answer differs from fallback plurality")
                if None not in votes and record.final_answer != _oracle_plurality(answered):
                    flag(name, qid, "answer differs from full-pool plurality")
            elif strategy.kind in (StrategyKind.SIMPLE_MV, StrategyKind.WEIGHTED_MV):
                if record.invoked_count != n:
                    flag(name, qid, f"invoked {record.invoked_count}, expected full pool {n}")
                if (
                    strategy.kind is StrategyKind.SIMPLE_MV
                    and answered
                    and record.final_answer != _oracle_plurality(answered)
                ):
                    flag(name, qid, "answer differs from full-pool plurality")
            else:
                assert strategy.k is not None
                if record.invoked_count != strategy.k:
                    flag(name, qid, f"invoked {record.invoked_count}, expected budget {strategy.k}")
                    continue
                prefix_votes = [
                    (j, v) for j, v in zip(record.order[: strategy.k], votes[: strategy.k])
                    if v is not None
                ]
                if prefix_votes and record.final_answer != _oracle_plurality(prefix_votes):
                    flag(name, qid, "answer differs from budget plurality")

    return OracleVerdict(checked=checked, mismatches=mismatches)
