"""Majority voting with reliability-ranked agents and quorum early stopping.

The library simulates (or drives, over HTTP) a pool of answer-producing
agents, orders them by estimated reliability, and stops invoking as soon as
one answer holds a strict-majority quorum - provably returning the same
answer full majority voting would, at a fraction of the invocations.
"""

from .agents import (
    AgentProfile,
    HttpBackend,
    ReplayBackend,
    SimulatedBackend,
    build_http_pool,
    build_replay_pool,
    build_simulated_pool,
    derive_rng,
    generate_trace,
    load_endpoints,
    load_profiles,
    load_trace,
    write_trace,
)
from .confidence import (
    DEFAULT_COLD_START_PRIOR,
    Ranking,
    ScoreStrategy,
    historical_reliability,
    rank_agents,
    semantic_reliability,
)
from .core import (
    ABSTAIN,
    DEFAULT_BUFFER_CAPACITY,
    DEFAULT_EMBEDDING_DIM,
    Abstain,
    AgentConfidence,
    AgentId,
    Answer,
    ConfigError,
    DimensionMismatchError,
    GlobalState,
    Query,
    QuorumVoteError,
    SemanticBuffer,
    StateFormatError,
    StateVersionError,
    StopReason,
    VoteOutcome,
    canonicalize_answer,
    load_state,
    save_state,
)
from .embedding import EmbeddingCache, HashingEncoder, HttpEmbeddingProvider, cosine, fnv1a_64
from .harness import (
    ExperimentReport,
    OracleVerdict,
    QueryRecord,
    RunSettings,
    Strategy,
    StrategyKind,
    StrategyResult,
    compute_metrics,
    config_digest,
    load_dataset,
    oracle_check,
    parse_strategies,
    parse_strategy,
    run_experiment,
)
from .report import load_report, render_table, write_report
from .updating import apply_vote_update
from .voting import (
    AllAbstainedError,
    AnswerSource,
    DuplicateVoteError,
    OutOfOrderVoteError,
    SessionClosedError,
    SessionStatus,
    VoteSession,
    VotingError,
    finalize_plurality,
    majority_threshold,
    outcome_audit_records,
    plurality_winner,
    run_session,
    submit_vote,
    weighted_winner,
)

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN",
    "DEFAULT_BUFFER_CAPACITY",
    "DEFAULT_COLD_START_PRIOR",
    "DEFAULT_EMBEDDING_DIM",
    "Abstain",
    "AgentConfidence",
    "AgentId",
    "AgentProfile",
    "AllAbstainedError",
    "Answer",
    "AnswerSource",
    "ConfigError",
    "DimensionMismatchError",
    "DuplicateVoteError",
    "EmbeddingCache",
    "ExperimentReport",
    "GlobalState",
    "HashingEncoder",
    "HttpBackend",
    "HttpEmbeddingProvider",
    "OracleVerdict",
    "OutOfOrderVoteError",
    "Query",
    "QueryRecord",
    "QuorumVoteError",
    "Ranking",
    "ReplayBackend",
    "RunSettings",
    "ScoreStrategy",
    "SemanticBuffer",
    "SessionClosedError",
    "SessionStatus",
    "SimulatedBackend",
    "StateFormatError",
    "StateVersionError",
    "StopReason",
    "Strategy",
    "StrategyKind",
    "StrategyResult",
    "VoteOutcome",
    "VoteSession",
    "VotingError",
    "apply_vote_update",
    "build_http_pool",
    "build_replay_pool",
    "build_simulated_pool",
    "canonicalize_answer",
    "compute_metrics",
    "config_digest",
    "cosine",
    "derive_rng",
    "finalize_plurality",
    "fnv1a_64",
    "generate_trace",
    "historical_reliability",
    "load_dataset",
    "load_endpoints",
    "load_profiles",
    "load_report",
    "load_state",
    "load_trace",
    "majority_threshold",
    "oracle_check",
    "outcome_audit_records",
    "parse_strategies",
    "parse_strategy",
    "plurality_winner",
    "rank_agents",
    "render_table",
    "run_experiment",
    "run_session",
    "save_state",
    "semantic_reliability",
    "submit_vote",
    "weighted_winner",
    "write_report",
    "write_trace",
    "__version__",
]
