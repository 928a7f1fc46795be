"""Shared domain types, answer canonicalization, and confidence-state persistence.

Everything that crosses module boundaries lives here: agent/query/answer records,
the per-agent confidence state with its bounded semantic buffer, vote outcomes,
and the versioned JSON snapshot format for the global state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path

import numpy as np

SNAPSHOT_VERSION = 1
DEFAULT_BUFFER_CAPACITY = 128
DEFAULT_EMBEDDING_DIM = 256


class QuorumVoteError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(QuorumVoteError):
    """An embedding vector does not match the configured dimension."""


class StateVersionError(QuorumVoteError):
    """A state snapshot was written with an unsupported format version."""


class StateFormatError(QuorumVoteError):
    """A state snapshot file is malformed."""


class ConfigError(QuorumVoteError):
    """An input file (dataset, profiles, endpoints, trace, config) is invalid."""


@dataclass(frozen=True)
class AgentId:
    """Position and display name of one agent in a fixed pool."""

    index: int
    label: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"agent index must be >= 0, got {self.index}")


@dataclass(frozen=True)
class Answer:
    """An agent response; equality between answers means equal canonical strings."""

    canonical: str
    raw: str


class Abstain:
    """Sentinel for a backend that failed to produce an answer.

    Abstains count toward the invoked-agent total but never toward any answer's
    tally. Use the module-level ABSTAIN singleton.
    """

    _instance: "Abstain | None" = None

    def __new__(cls) -> "Abstain":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSTAIN"


ABSTAIN = Abstain()


@dataclass(frozen=True)
class Query:
    """One benchmark question, optionally labeled with a gold answer and topic."""

    id: str
    text: str
    gold: Answer | None = None
    topic: str | None = None


def canonicalize_answer(raw: str, *, numeric: bool = False) -> Answer:
    """Normalize a raw answer string into its canonical comparison form.

    Pipeline: trim whitespace, case-fold, strip one trailing period (left alone
    when part of a period run, so the result is a fixpoint). With ``numeric``
    enabled, strings that parse as decimals are re-rendered minimally
    ("3.0" -> "3", "0.50" -> "0.5").
    """
    text = raw.strip().casefold()
    if text.endswith(".") and not text.endswith(".."):
        text = text[:-1]
    if numeric:
        rendered = _render_decimal(text)
        if rendered is not None:
            text = rendered
    return Answer(canonical=text, raw=raw)


def _render_decimal(text: str) -> str | None:
    try:
        value = Decimal(text)
    except (InvalidOperation, ValueError):
        return None
    if not value.is_finite():
        return None
    value = value.normalize()
    if value == value.to_integral_value():
        return str(int(value))
    return format(value, "f")


class SemanticBuffer:
    """Bounded FIFO of embedding vectors backed by a ring over one ndarray.

    Appends beyond capacity evict the oldest vector. `rows()` exposes the live
    vectors without copying (storage order, fine for averaging); `vectors()`
    returns copies in insertion order for serialization and inspection.
    """

    __slots__ = ("capacity", "dim", "_data", "_size", "_start")

    def __init__(self, capacity: int, dim: int) -> None:
        if capacity < 1:
            raise ValueError(f"buffer capacity must be >= 1, got {capacity}")
        if dim < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {dim}")
        self.capacity = capacity
        self.dim = dim
        self._data = np.zeros((capacity, dim), dtype=np.float64)
        self._size = 0
        self._start = 0

    def __len__(self) -> int:
        return self._size

    def append(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected vector of dimension {self.dim}, got shape {vec.shape}"
            )
        if self._size < self.capacity:
            self._data[(self._start + self._size) % self.capacity] = vec
            self._size += 1
        else:
            self._data[self._start] = vec
            self._start = (self._start + 1) % self.capacity

    def rows(self) -> np.ndarray:
        """Live vectors as an (n, dim) array view; row order is not chronological."""
        return self._data[: self._size]

    def vectors(self) -> list[np.ndarray]:
        """Copies of the stored vectors, oldest first."""
        order = [(self._start + k) % self.capacity for k in range(self._size)]
        return [self._data[i].copy() for i in order]

    def clone(self) -> "SemanticBuffer":
        out = SemanticBuffer(self.capacity, self.dim)
        out._data = self._data.copy()
        out._size = self._size
        out._start = self._start
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SemanticBuffer):
            return NotImplemented
        if (self.capacity, self.dim, self._size) != (other.capacity, other.dim, other._size):
            return False
        mine, theirs = self.vectors(), other.vectors()
        return all(np.array_equal(a, b) for a, b in zip(mine, theirs))


@dataclass
class AgentConfidence:
    """Running reliability record for one agent.

    c counts queries where the agent matched the final consensus, v counts
    queries it participated in; 0 <= c <= v always. The buffer holds embeddings
    of consensus-matching queries.
    """

    c: int
    v: int
    buffer: SemanticBuffer

    def validate(self) -> None:
        if not 0 <= self.c <= self.v:
            raise ValueError(f"invalid confidence counts c={self.c}, v={self.v}")

    def clone(self) -> "AgentConfidence":
        return AgentConfidence(c=self.c, v=self.v, buffer=self.buffer.clone())


@dataclass
class GlobalState:
    """All per-agent confidence records; the only mutable cross-query state."""

    agents: list[AgentConfidence]
    version: int = SNAPSHOT_VERSION

    @classmethod
    def fresh(
        cls,
        n: int,
        *,
        capacity: int = DEFAULT_BUFFER_CAPACITY,
        dim: int = DEFAULT_EMBEDDING_DIM,
    ) -> "GlobalState":
        if n < 1:
            raise ValueError(f"pool size must be >= 1, got {n}")
        return cls(agents=[AgentConfidence(0, 0, SemanticBuffer(capacity, dim)) for _ in range(n)])

    def clone(self) -> "GlobalState":
        return GlobalState(agents=[phi.clone() for phi in self.agents], version=self.version)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GlobalState):
            return NotImplemented
        return self.version == other.version and self.agents == other.agents


class StopReason(Enum):
    """Why a vote session ended."""

    QUORUM_REACHED = "quorum"
    PLURALITY_FALLBACK = "plurality"
    TRUNCATED = "truncated"  # fixed-budget strategies only; never emitted by run_session


@dataclass(frozen=True)
class VoteOutcome:
    """Finalized result of one query's vote session.

    For quorum sessions: tau <= invoked_count <= N, a QUORUM_REACHED answer has
    at least tau votes, and an abstain-free PLURALITY_FALLBACK invoked the full
    pool. votes holds (agent, answer-or-ABSTAIN) pairs in invocation order.
    """

    query_id: str
    final_answer: Answer
    invoked: tuple[AgentId, ...]
    votes: tuple[tuple[AgentId, Answer | Abstain], ...]
    stop_reason: StopReason

    @property
    def invoked_count(self) -> int:
        return len(self.invoked)


def save_state(state: GlobalState, path: str | Path) -> None:
    """Write a GlobalState snapshot as versioned, diff-friendly JSON."""
    if not state.agents:
        raise ValueError("cannot snapshot a state with no agents")
    dim = state.agents[0].buffer.dim
    capacity = state.agents[0].buffer.capacity
    doc = {
        "version": state.version,
        "dim": dim,
        "capacity": capacity,
        "agents": [
            {
                "id": j,
                "c": phi.c,
                "v": phi.v,
                "buffer": [[float(x) for x in vec] for vec in phi.buffer.vectors()],
            }
            for j, phi in enumerate(state.agents)
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_state(path: str | Path) -> GlobalState:
    """Load a snapshot written by save_state.

    Raises StateVersionError on a version mismatch, StateFormatError on
    malformed documents, DimensionMismatchError on inconsistent vectors.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StateFormatError(f"cannot read state snapshot {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise StateFormatError("state snapshot must be a JSON object")
    version = doc.get("version")
    if version != SNAPSHOT_VERSION:
        raise StateVersionError(
            f"snapshot version {version!r} is not supported (expected {SNAPSHOT_VERSION})"
        )
    try:
        dim = int(doc["dim"])
        capacity = int(doc["capacity"])
        raw_agents = doc["agents"]
        if not isinstance(raw_agents, list) or not raw_agents:
            raise StateFormatError("snapshot must list at least one agent")
        agents: list[AgentConfidence] = []
        for j, entry in enumerate(raw_agents):
            if entry["id"] != j:
                raise StateFormatError(f"agent ids must be 0..N-1 in order, got {entry['id']} at {j}")
            buffer = SemanticBuffer(capacity, dim)
            for vec in entry["buffer"]:
                if len(vec) != dim:
                    raise DimensionMismatchError(
                        f"agent {j} stores a vector of length {len(vec)}, expected {dim}"
                    )
                buffer.append(np.asarray(vec, dtype=np.float64))
            phi = AgentConfidence(c=int(entry["c"]), v=int(entry["v"]), buffer=buffer)
            phi.validate()
            agents.append(phi)
    except (QuorumVoteError, ValueError) as exc:
        if isinstance(exc, QuorumVoteError):
            raise
        raise StateFormatError(f"malformed state snapshot: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise StateFormatError(f"malformed state snapshot: {exc!r}") from exc
    return GlobalState(agents=agents, version=SNAPSHOT_VERSION)
