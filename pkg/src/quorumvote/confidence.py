"""Per-agent reliability scores and the descending-reliability invocation order."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import AgentConfidence, DimensionMismatchError, GlobalState

DEFAULT_COLD_START_PRIOR = 0.5


class ScoreStrategy(Enum):
    """How agent reliability is estimated for a query."""

    HISTORICAL = "historical"
    SEMANTIC = "semantic"


@dataclass(frozen=True)
class Ranking:
    """A full invocation order over the pool.

    ``order`` is a permutation of agent indices; when present, ``scores`` is
    aligned with it and non-increasing (ties already broken by ascending agent
    index). Externally imposed orders (random baselines) carry no scores.
    """

    order: tuple[int, ...]
    scores: tuple[float, ...] | None = None
    strategy: ScoreStrategy | None = None

    def __post_init__(self) -> None:
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"order {self.order} is not a permutation of 0..N-1")
        if self.scores is not None:
            if len(self.scores) != len(self.order):
                raise ValueError("scores must align with order")
            for a, b in zip(self.scores, self.scores[1:]):
                if a < b:
                    raise ValueError("scores must be non-increasing along order")

    def __len__(self) -> int:
        return len(self.order)


def historical_reliability(
    phi: AgentConfidence,
    *,
    prior: float = DEFAULT_COLD_START_PRIOR,
    laplace: bool = False,
) -> float:
    """Fraction of participated votes that matched the consensus, in [0, 1].

    Returns the cold-start prior when the agent has never participated.
    Optional Laplace smoothing computes (c+1)/(v+2) instead of plain c/v.
    """
    if laplace:
        return (phi.c + 1) / (phi.v + 2)
    if phi.v == 0:
        return prior
    return phi.c / phi.v


def semantic_reliability(
    query_vec: np.ndarray,
    phi: AgentConfidence,
    *,
    prior: float = DEFAULT_COLD_START_PRIOR,
) -> float:
    """Mean cosine between the query embedding and the agent's stored embeddings.

    Returns the cold-start prior when the buffer is empty.
    """
    if len(phi.buffer) == 0:
        return prior
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (phi.buffer.dim,):
        raise DimensionMismatchError(
            f"query vector has shape {query_vec.shape}, buffer dimension is {phi.buffer.dim}"
        )
    rows = phi.buffer.rows()
    denom = np.linalg.norm(rows, axis=1) * float(np.linalg.norm(query_vec))
    dots = rows @ query_vec
    cosines = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0.0)
    return float(cosines.mean())


def rank_agents(
    state: GlobalState,
    strategy: ScoreStrategy,
    query_vec: np.ndarray | None = None,
    *,
    prior: float = DEFAULT_COLD_START_PRIOR,
    laplace: bool = False,
) -> Ranking:
    """Score every agent and return the descending-score invocation order.

    The sort is deterministic: equal scores fall back to ascending agent index.
    SEMANTIC ranking requires the query embedding.
    """
    if not state.agents:
        raise ValueError("state has no agents to rank")
    if strategy is ScoreStrategy.HISTORICAL:
        scores = [historical_reliability(phi, prior=prior, laplace=laplace) for phi in state.agents]
    elif strategy is ScoreStrategy.SEMANTIC:
        if query_vec is None:
            raise ValueError("semantic ranking requires the query embedding")
        scores = [semantic_reliability(query_vec, phi, prior=prior) for phi in state.agents]
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown strategy {strategy!r}")
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return Ranking(
        order=tuple(order),
        scores=tuple(scores[j] for j in order),
        strategy=strategy,
    )
