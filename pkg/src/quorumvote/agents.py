"""Answer backends: simulated agents, trace replay, and HTTP chat endpoints.

Simulated answers are a pure function of (seed, agent index, query id), never
of invocation order, so every ordering strategy sees the same trace.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import requests

from .core import (
    ABSTAIN,
    Abstain,
    AgentId,
    Answer,
    ConfigError,
    Query,
    canonicalize_answer,
)

DEFAULT_DISTRACTORS = 4
DEFAULT_HTTP_TIMEOUT_S = 30.0
DEFAULT_HTTP_RETRIES = 2

ANSWER_LINE_RE = re.compile(r"ANSWER:\s*(.+)")

PROMPT_TEMPLATE = (
    "Answer the question below. End your reply with one line of the form\n"
    "ANSWER: <your answer>\n"
    "\n"
    "Question: {text}"
)


def derive_rng(seed: int, namespace: str, *parts: object) -> random.Random:
    """Deterministic RNG keyed by seed, namespace, and identifying parts.

    Hash-derived so that streams for different (agent, query) pairs are
    independent and insensitive to the order in which they are drawn.
    """
    key = "|".join([str(seed), namespace, *(str(part) for part in parts)])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class AgentProfile:
    """Behavior knobs for one simulated agent.

    accuracy is the chance of answering with the gold answer, conditional on
    not abstaining. Wrong answers are drawn uniformly from `distractors`
    synthetic alternatives unless `fixed_distractor` pins a single wrong
    answer (useful for correlated-error setups). latency_ms is carried for
    reporting only; the simulator never sleeps.
    """

    label: str
    accuracy: float
    distractors: int = DEFAULT_DISTRACTORS
    fixed_distractor: str | None = None
    abstain_rate: float = 0.0
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ConfigError(f"accuracy must be in [0, 1], got {self.accuracy}")
        if not 0.0 <= self.abstain_rate <= 1.0:
            raise ConfigError(f"abstain_rate must be in [0, 1], got {self.abstain_rate}")
        if self.distractors < 1:
            raise ConfigError(f"distractors must be >= 1, got {self.distractors}")


@dataclass(frozen=True)
class SimulatedBackend:
    """Profile-driven synthetic agent over gold-labeled queries."""

    agent: AgentId
    profile: AgentProfile
    seed: int
    numeric: bool = False

    def invoke(self, query: Query) -> Answer | Abstain:
        if query.gold is None:
            raise ValueError(f"query {query.id!r} has no gold answer to simulate against")
        rng = derive_rng(self.seed, "vote", self.agent.index, query.id)
        if self.profile.abstain_rate > 0.0 and rng.random() < self.profile.abstain_rate:
            return ABSTAIN
        if rng.random() < self.profile.accuracy:
            return query.gold
        if self.profile.fixed_distractor is not None:
            return canonicalize_answer(self.profile.fixed_distractor, numeric=self.numeric)
        text = f"distractor-{rng.randrange(self.profile.distractors)}"
        answer = canonicalize_answer(text, numeric=self.numeric)
        if answer.canonical == query.gold.canonical:
            # keep wrong answers wrong even for datasets whose gold collides
            answer = canonicalize_answer(f"{text}-alt", numeric=self.numeric)
        return answer


@dataclass(frozen=True)
class ReplayBackend:
    """Replays answers from a recorded trace; missing entries become abstains."""

    agent: AgentId
    trace: dict[tuple[str, int], str | None]
    numeric: bool = False

    def invoke(self, query: Query) -> Answer | Abstain:
        raw = self.trace.get((query.id, self.agent.index))
        if raw is None:
            return ABSTAIN
        return canonicalize_answer(raw, numeric=self.numeric)


@dataclass(frozen=True)
class HttpBackend:
    """Chat-completions endpoint wrapper.

    Sends the query with a prompt that demands a final "ANSWER: ..." line and
    extracts the last such line. Transport failures are retried up to
    `retries` extra attempts, then reported as an abstention; a response
    without an answer line abstains immediately.
    """

    agent: AgentId
    url: str
    model: str
    auth_env: str | None = None
    timeout_s: float = DEFAULT_HTTP_TIMEOUT_S
    retries: int = DEFAULT_HTTP_RETRIES
    numeric: bool = False
    prompt_template: str = PROMPT_TEMPLATE

    def invoke(self, query: Query) -> Answer | Abstain:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": self.prompt_template.format(text=query.text)}],
            "temperature": 0,
        }
        headers = {}
        if self.auth_env:
            token = os.environ.get(self.auth_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        for _ in range(self.retries + 1):
            try:
                response = requests.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout_s
                )
                response.raise_for_status()
                content = response.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, TypeError, ValueError):
                continue
            matches = ANSWER_LINE_RE.findall(content)
            if not matches:
                return ABSTAIN
            return canonicalize_answer(matches[-1], numeric=self.numeric)
        return ABSTAIN


def load_profiles(path: str | Path) -> list[AgentProfile]:
    """Read agent profiles from a JSON array of objects."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read profiles from {path}: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"profiles file {path} must hold a non-empty JSON array")
    profiles = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "accuracy" not in entry:
            raise ConfigError(f"profile {i} in {path} must be an object with an 'accuracy' key")
        known = {"label", "accuracy", "distractors", "fixed_distractor", "abstain_rate", "latency_ms"}
        unknown = set(entry) - known
        if unknown:
            raise ConfigError(f"profile {i} in {path} has unknown keys {sorted(unknown)}")
        profiles.append(AgentProfile(label=entry.get("label", f"agent-{i}"), **{
            k: v for k, v in entry.items() if k != "label"
        }))
    return profiles


def load_endpoints(path: str | Path) -> list[dict]:
    """Read HTTP endpoint definitions from a JSON array of objects."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read endpoints from {path}: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"endpoints file {path} must hold a non-empty JSON array")
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "url" not in entry or "model" not in entry:
            raise ConfigError(f"endpoint {i} in {path} must be an object with 'url' and 'model'")
    return raw


def build_simulated_pool(
    profiles: Sequence[AgentProfile], seed: int, *, numeric: bool = False
) -> list[SimulatedBackend]:
    return [
        SimulatedBackend(agent=AgentId(i, profile.label), profile=profile, seed=seed, numeric=numeric)
        for i, profile in enumerate(profiles)
    ]


def build_replay_pool(
    trace: dict[tuple[str, int], str | None], *, n: int | None = None, numeric: bool = False
) -> list[ReplayBackend]:
    if n is None:
        if not trace:
            raise ConfigError("cannot infer pool size from an empty trace")
        n = max(index for _, index in trace) + 1
    return [
        ReplayBackend(agent=AgentId(i, f"agent-{i}"), trace=trace, numeric=numeric)
        for i in range(n)
    ]


def build_http_pool(endpoints: Sequence[dict], *, numeric: bool = False) -> list[HttpBackend]:
    pool = []
    for i, entry in enumerate(endpoints):
        pool.append(
            HttpBackend(
                agent=AgentId(i, entry.get("label", f"agent-{i}")),
                url=entry["url"],
                model=entry["model"],
                auth_env=entry.get("auth_env"),
                timeout_s=float(entry.get("timeout_s", DEFAULT_HTTP_TIMEOUT_S)),
                retries=int(entry.get("retries", DEFAULT_HTTP_RETRIES)),
                numeric=numeric,
            )
        )
    return pool


def generate_trace(queries: Sequence[Query], backends: Sequence[SimulatedBackend]) -> list[dict]:
    """Materialize every (query, agent) answer as trace records."""
    records = []
    for query in queries:
        for backend in backends:
            answer = backend.invoke(query)
            records.append(
                {
                    "query_id": query.id,
                    "agent_id": backend.agent.index,
                    "answer": None if isinstance(answer, Abstain) else answer.raw,
                }
            )
    return records


def write_trace(path: str | Path, records: Sequence[dict]) -> None:
    """Write trace records as line-delimited JSON with stable key order."""
    lines = [json.dumps(record, ensure_ascii=False, sort_keys=True) for record in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trace(path: str | Path) -> dict[tuple[str, int], str | None]:
    """Read a trace file back into a lookup keyed by (query_id, agent_id)."""
    trace: dict[tuple[str, int], str | None] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read trace from {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            key = (record["query_id"], int(record["agent_id"]))
            answer = record["answer"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad trace record: {exc}") from exc
        if answer is not None and not isinstance(answer, str):
            raise ConfigError(f"{path}:{lineno}: answer must be a string or null")
        if key in trace:
            raise ConfigError(f"{path}:{lineno}: duplicate trace entry for {key}")
        trace[key] = answer
    return trace
