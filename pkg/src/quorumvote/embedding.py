"""Query embedding providers and cosine similarity.

The default encoder is a deterministic signed feature hasher so simulations and
tests are bit-reproducible on every platform; an HTTP provider with the same
signature lets deployments plug in a real sentence-encoder service.
"""

from __future__ import annotations

import os
import re
from typing import Protocol

import numpy as np
import requests

from .core import DEFAULT_EMBEDDING_DIM, DimensionMismatchError, Query, QuorumVoteError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_TOKEN_RE = re.compile(r"[0-9a-z]+")


class EmbeddingProviderError(QuorumVoteError):
    """An external embedding provider failed to produce vectors."""


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash; fixed constants keep bucketing platform-stable."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


class HashingEncoder:
    """Deterministic signed token-hashing encoder.

    Lowercases, splits on non-alphanumeric runs, hashes each token with FNV-1a,
    adds +-1 (sign from the top hash bit) into bucket ``hash % dim``, and
    L2-normalizes. Empty text maps to the zero vector. Stateless and pure.
    """

    def __init__(self, dim: int = DEFAULT_EMBEDDING_DIM) -> None:
        if dim < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {dim}")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            h = fnv1a_64(token.encode("utf-8"))
            sign = 1.0 if (h >> 63) == 0 else -1.0
            vec[h % self.dim] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec


class HttpEmbeddingProvider:
    """Client for a JSON-over-HTTP encoder service.

    Wire format: POST {"texts": [str, ...]} -> {"vectors": [[float, ...], ...]}.
    Failures surface as EmbeddingProviderError (embeddings feed ranking, so a
    dead provider must abort the run rather than silently degrade scores).
    """

    def __init__(
        self,
        url: str,
        dim: int = DEFAULT_EMBEDDING_DIM,
        *,
        auth_env: str | None = None,
        timeout_s: float = 10.0,
        retries: int = 2,
    ) -> None:
        self.url = url
        self.dim = dim
        self.auth_env = auth_env
        self.timeout_s = timeout_s
        self.retries = retries

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env, "")
            if not token:
                raise EmbeddingProviderError(
                    f"auth environment variable {self.auth_env} is not set"
                )
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: list[str]) -> list[np.ndarray]:
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(
                    self.url,
                    json={"texts": texts},
                    headers=self._headers(),
                    timeout=self.timeout_s,
                )
                resp.raise_for_status()
                vectors = resp.json()["vectors"]
                break
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
        else:
            raise EmbeddingProviderError(f"embedding service failed: {last_error}")
        if len(vectors) != len(texts):
            raise EmbeddingProviderError(
                f"embedding service returned {len(vectors)} vectors for {len(texts)} texts"
            )
        out: list[np.ndarray] = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise EmbeddingProviderError(
                    f"embedding service returned shape {arr.shape}, expected ({self.dim},)"
                )
            out.append(arr)
        return out


class EmbeddingCache:
    """Per-run memo of query embeddings, keyed by query id."""

    def __init__(self, provider: EmbeddingProvider) -> None:
        self.provider = provider
        self._by_id: dict[str, np.ndarray] = {}

    def get(self, query: Query) -> np.ndarray:
        vec = self._by_id.get(query.id)
        if vec is None:
            vec = self.provider.embed(query.text)
            self._by_id[query.id] = vec
        return vec


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; defined as 0 when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"cosine of shapes {u.shape} and {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))
