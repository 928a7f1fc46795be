"""Shared helpers: agent pools, materialized traces, and a chat-endpoint stub."""

from __future__ import annotations

import json
import threading
import time
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from itertools import cycle, islice

import pytest

from quorumvote import (
    AgentProfile,
    Query,
    build_replay_pool,
    build_simulated_pool,
    canonicalize_answer,
    generate_trace,
)

MIXED_ACCURACIES = (0.95, 0.95, 0.95, 0.80, 0.80, 0.80, 0.60, 0.60, 0.60)


def mixed_profiles() -> list[AgentProfile]:
    return [AgentProfile(label=f"agent-{i}", accuracy=p) for i, p in enumerate(MIXED_ACCURACIES)]


def make_queries(count: int, *, golds=("alpha", "beta", "gamma"), prefix="q") -> list[Query]:
    gold_cycle = islice(cycle(golds), count)
    return [
        Query(id=f"{prefix}{i:05d}", text=f"{prefix} question number {i}",
              gold=canonicalize_answer(gold))
        for i, gold in enumerate(gold_cycle)
    ]


def materialize(queries, profiles, seed):
    """Trace dict plus a replay pool over it, as the harness would build them."""
    backends = build_simulated_pool(profiles, seed)
    records = generate_trace(queries, backends)
    trace = {(r["query_id"], r["agent_id"]): r["answer"] for r in records}
    return trace, build_replay_pool(trace)


@pytest.fixture
def nine_mixed():
    return mixed_profiles()


class ChatStub(BaseHTTPRequestHandler):
    """Chat-completions stub; the URL path selects the failure mode."""

    hits: Counter
    seen_auth: dict

    def do_POST(self):
        type(self).hits[self.path] += 1
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen_auth[self.path] = self.headers.get("Authorization")

        if self.path == "/timeout":
            time.sleep(0.8)
            return  # client has given up; close without a response
        if self.path == "/error":
            self.send_response(500)
            self.end_headers()
            return
        if self.path == "/badjson":
            self._reply(b"{ not json")
            return

        question = body["messages"][0]["content"]
        if self.path == "/noanswer":
            content = "I am not sure about this one."
        elif self.path == "/twolines":
            content = "ANSWER: draft guess\nSome working.\nANSWER:  Paris. "
        else:
            content = f"Thinking about {len(question)} chars.\nANSWER: Paris"
        payload = {"choices": [{"message": {"role": "assistant", "content": content}}]}
        self._reply(json.dumps(payload).encode())

    def _reply(self, blob: bytes):
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    ChatStub.hits = Counter()
    ChatStub.seen_auth = {}
    server = ThreadingHTTPServer(("127.0.0.1", 0), ChatStub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
