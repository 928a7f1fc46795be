import json

import pytest

from quorumvote import (
    ABSTAIN,
    Abstain,
    AgentId,
    AgentProfile,
    ConfigError,
    Query,
    ReplayBackend,
    build_replay_pool,
    build_simulated_pool,
    canonicalize_answer,
    derive_rng,
    generate_trace,
    load_endpoints,
    load_profiles,
    load_trace,
    write_trace,
)

from conftest import make_queries, mixed_profiles


def test_derive_rng_is_deterministic_and_keyed():
    a = derive_rng(7, "vote", 3, "q1").random()
    b = derive_rng(7, "vote", 3, "q1").random()
    c = derive_rng(7, "vote", 4, "q1").random()
    d = derive_rng(8, "vote", 3, "q1").random()
    e = derive_rng(7, "order", 3, "q1").random()
    assert a == b
    assert len({a, c, d, e}) == 4


def test_simulated_answers_ignore_invocation_order():
    profile = AgentProfile(label="x", accuracy=0.5)
    backend = build_simulated_pool([profile], seed=3)[0]
    queries = make_queries(50)
    forward = [backend.invoke(q) for q in queries]
    backward = [backend.invoke(q) for q in reversed(queries)]
    assert forward == backward[::-1]


def test_simulated_accuracy_tracks_profile():
    # binomial: p=0.8 over 2000 draws, 3 sigma ~ 0.027
    profile = AgentProfile(label="x", accuracy=0.8)
    backend = build_simulated_pool([profile], seed=11)[0]
    queries = make_queries(2000, golds=("yes",))
    hits = sum(backend.invoke(q).canonical == "yes" for q in queries)
    assert abs(hits / 2000 - 0.8) < 0.03


def test_simulated_backend_requires_gold():
    backend = build_simulated_pool([AgentProfile(label="x", accuracy=1.0)], seed=1)[0]
    with pytest.raises(ValueError):
        backend.invoke(Query(id="q", text="unlabeled"))


def test_wrong_answers_never_collide_with_gold():
    backend = build_simulated_pool([AgentProfile(label="x", accuracy=0.0)], seed=5)[0]
    queries = make_queries(200, golds=("distractor-2",))
    answers = [backend.invoke(q).canonical for q in queries]
    assert "distractor-2" not in answers
    assert any(a == "distractor-2-alt" for a in answers)


def test_fixed_distractor_is_used_verbatim():
    profile = AgentProfile(label="x", accuracy=0.0, fixed_distractor="Always Wrong")
    backend = build_simulated_pool([profile], seed=5)[0]
    assert backend.invoke(make_queries(1)[0]).canonical == "always wrong"


def test_abstain_rate_one_always_abstains():
    profile = AgentProfile(label="x", accuracy=1.0, abstain_rate=1.0)
    backend = build_simulated_pool([profile], seed=5)[0]
    assert all(isinstance(backend.invoke(q), Abstain) for q in make_queries(10))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"accuracy": 1.5},
        {"accuracy": -0.1},
        {"accuracy": 0.5, "abstain_rate": 2.0},
        {"accuracy": 0.5, "distractors": 0},
    ],
)
def test_profile_validation(kwargs):
    with pytest.raises(ConfigError):
        AgentProfile(label="x", **kwargs)


def test_trace_roundtrip_and_stable_bytes(tmp_path):
    queries = make_queries(10)
    backends = build_simulated_pool(mixed_profiles(), seed=2)
    records = generate_trace(queries, backends)
    assert len(records) == 10 * 9

    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_trace(first, records)
    write_trace(second, records)
    assert first.read_bytes() == second.read_bytes()

    loaded = load_trace(first)
    assert loaded == {(r["query_id"], r["agent_id"]): r["answer"] for r in records}


def test_load_trace_reports_line_numbers(tmp_path):
    path = tmp_path / "trace.jsonl"
    path.write_text('{"query_id": "q", "agent_id": 0, "answer": "x"}\nnot json\n')
    with pytest.raises(ConfigError, match="2"):
        load_trace(path)


def test_load_trace_rejects_duplicates(tmp_path):
    line = '{"query_id": "q", "agent_id": 0, "answer": "x"}'
    path = tmp_path / "trace.jsonl"
    path.write_text(line + "\n" + line + "\n")
    with pytest.raises(ConfigError, match="duplicate"):
        load_trace(path)


def test_replay_missing_entry_abstains():
    backend = ReplayBackend(agent=AgentId(0, "a0"), trace={("q1", 0): "yes"})
    assert backend.invoke(Query(id="q1", text="t")).canonical == "yes"
    assert isinstance(backend.invoke(Query(id="q2", text="t")), Abstain)


def test_replay_null_answer_abstains():
    backend = ReplayBackend(agent=AgentId(0, "a0"), trace={("q1", 0): None})
    assert backend.invoke(Query(id="q1", text="t")) is ABSTAIN


def test_build_replay_pool_infers_pool_size():
    trace = {("q1", 0): "a", ("q1", 4): "b"}
    pool = build_replay_pool(trace)
    assert len(pool) == 5
    assert [b.agent.index for b in pool] == [0, 1, 2, 3, 4]


def test_load_profiles_defaults_and_errors(tmp_path):
    path = tmp_path / "profiles.json"
    path.write_text(json.dumps([{"accuracy": 0.9}, {"label": "b", "accuracy": 0.5}]))
    profiles = load_profiles(path)
    assert profiles[0].label == "agent-0" and profiles[1].label == "b"

    path.write_text(json.dumps([{"accuracy": 0.9, "nonsense": 1}]))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_profiles(path)

    path.write_text(json.dumps([{"label": "no-accuracy"}]))
    with pytest.raises(ConfigError):
        load_profiles(path)

    path.write_text("[]")
    with pytest.raises(ConfigError):
        load_profiles(path)


def test_load_endpoints_requires_url_and_model(tmp_path):
    path = tmp_path / "endpoints.json"
    path.write_text(json.dumps([{"url": "http://x", "model": "m"}]))
    assert load_endpoints(path)[0]["model"] == "m"
    path.write_text(json.dumps([{"url": "http://x"}]))
    with pytest.raises(ConfigError):
        load_endpoints(path)


def test_numeric_mode_canonicalizes_replayed_answers():
    backend = ReplayBackend(agent=AgentId(0, "a0"), trace={("q1", 0): "3.0"}, numeric=True)
    assert backend.invoke(Query(id="q1", text="t")).canonical == "3"
    plain = ReplayBackend(agent=AgentId(0, "a0"), trace={("q1", 0): "3.0"})
    assert plain.invoke(Query(id="q1", text="t")).canonical == "3.0"
