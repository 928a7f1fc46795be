import json

import pytest

from quorumvote import (
    Query,
    RunSettings,
    build_replay_pool,
    load_report,
    parse_strategies,
    render_table,
    run_experiment,
    write_report,
)
from quorumvote.report import report_to_dict

from conftest import make_queries, materialize, mixed_profiles


@pytest.fixture(scope="module")
def small_report():
    queries = make_queries(40)
    _, pool = materialize(queries, mixed_profiles(), seed=17)
    settings = RunSettings(
        strategies=parse_strategies(["simple-mv", "ems-rel", "fixed-random-5"]), seed=17
    )
    return run_experiment(queries, pool, settings)


def test_written_outputs_are_byte_stable(tmp_path, small_report):
    first = write_report(small_report, tmp_path / "a")
    second = write_report(small_report, tmp_path / "b")
    assert [p.name for p in first] == [p.name for p in second]
    for left, right in zip(first, second):
        assert left.read_bytes() == right.read_bytes(), left.name


def test_report_json_roundtrip(tmp_path, small_report):
    paths = write_report(small_report, tmp_path, figures=False)
    loaded = load_report(tmp_path / "report.json")
    assert report_to_dict(loaded) == report_to_dict(small_report)
    assert loaded.config_digest == small_report.config_digest
    assert {p.name for p in paths} == {
        "report.json", "comparison.tsv",
        "audit-simple-mv.jsonl", "audit-ems-rel.jsonl", "audit-fixed-random-5.jsonl",
    }


def test_comparison_table_is_tab_delimited(tmp_path, small_report):
    write_report(small_report, tmp_path, figures=False)
    lines = (tmp_path / "comparison.tsv").read_text().splitlines()
    assert lines[0] == "strategy\taccuracy\tavg_agents"
    assert len(lines) == 4
    name, accuracy, avg_agents = lines[1].split("\t")
    assert name == "simple-mv"
    float(accuracy), float(avg_agents)  # parseable numbers


def test_audit_log_lines_match_invocations(tmp_path, small_report):
    write_report(small_report, tmp_path, figures=False)
    for name, result in small_report.strategies.items():
        lines = (tmp_path / f"audit-{name}.jsonl").read_text().splitlines()
        assert len(lines) == sum(r.invoked_count for r in result.per_query)
        parsed = json.loads(lines[0])
        assert set(parsed) == {"query_id", "rank", "agent_id", "answer", "abstain", "decided_after"}


def test_figures_are_rendered_as_png(tmp_path, small_report):
    paths = write_report(small_report, tmp_path)
    pngs = [p for p in paths if p.suffix == ".png"]
    assert {p.name for p in pngs} == {"invocation_distribution.png", "strategy_comparison.png"}
    for png in pngs:
        assert png.read_bytes().startswith(b"\x89PNG\r\n")


def test_unlabeled_dataset_reports_absent_accuracy(tmp_path):
    queries = [Query(id=q.id, text=q.text) for q in make_queries(10)]
    trace = {(q.id, j): "same" for q in queries for j in range(3)}
    pool = build_replay_pool(trace)
    report = run_experiment(
        queries, pool, RunSettings(strategies=parse_strategies(["simple-mv"]), seed=0)
    )
    assert report.strategies["simple-mv"].accuracy is None
    write_report(report, tmp_path, figures=False)
    assert "n/a" in (tmp_path / "comparison.tsv").read_text()
    assert "n/a" in render_table(report)


def test_render_table_lists_all_strategies(small_report):
    table = render_table(small_report)
    for name in small_report.strategies:
        assert name in table
