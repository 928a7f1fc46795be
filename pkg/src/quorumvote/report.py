"""Report emission: JSON document, flat comparison table, audit logs, figures."""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .core import ConfigError
from .harness import ExperimentReport, QueryRecord, StrategyResult

REPORT_BASENAME = "report.json"
TABLE_BASENAME = "comparison.tsv"


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "seed": report.seed,
        "config_digest": report.config_digest,
        "settings": report.settings,
        "strategies": {
            name: {
                "accuracy": result.accuracy,
                "avg_agents": result.avg_agents,
                "per_query": [
                    {
                        "query_id": record.query_id,
                        "final_answer": record.final_answer,
                        "correct": record.correct,
                        "invoked_count": record.invoked_count,
                        "stop_reason": record.stop_reason,
                        "order": list(record.order),
                    }
                    for record in result.per_query
                ],
            }
            for name, result in report.strategies.items()
        },
    }


def load_report(path: str | Path) -> ExperimentReport:
    """Read a written report back; audit logs and learned states are separate files."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report from {path}: {exc}") from exc
    try:
        strategies = {}
        for name, entry in data["strategies"].items():
            per_query = [
                QueryRecord(
                    query_id=record["query_id"],
                    final_answer=record["final_answer"],
                    correct=record["correct"],
                    invoked_count=int(record["invoked_count"]),
                    stop_reason=record["stop_reason"],
                    order=tuple(int(j) for j in record["order"]),
                )
                for record in entry["per_query"]
            ]
            strategies[name] = StrategyResult(
                name=name,
                accuracy=entry["accuracy"],
                avg_agents=entry["avg_agents"],
                per_query=per_query,
                audit=[],
                final_state=None,
            )
        return ExperimentReport(
            seed=int(data["seed"]),
            config_digest=data["config_digest"],
            settings=data["settings"],
            strategies=strategies,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"report {path} is malformed: {exc}") from exc


def render_table(report: ExperimentReport) -> str:
    """Fixed-width comparison table, one row per strategy."""
    rows = [("strategy", "accuracy", "avg_agents")]
    for name, result in report.strategies.items():
        accuracy = "n/a" if result.accuracy is None else f"{result.accuracy:.4f}"
        rows.append((name, accuracy, f"{result.avg_agents:.4f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _write_table(report: ExperimentReport, path: Path) -> None:
    lines = ["strategy\taccuracy\tavg_agents"]
    for name, result in report.strategies.items():
        accuracy = "n/a" if result.accuracy is None else f"{result.accuracy:.6f}"
        lines.append(f"{name}\t{accuracy}\t{result.avg_agents:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_audit(result: StrategyResult, path: Path) -> None:
    lines = [json.dumps(record, ensure_ascii=False, sort_keys=True) for record in result.audit]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _figure_invocations(report: ExperimentReport, path: Path) -> None:
    n = int(report.settings["n_agents"])
    xs = list(range(1, n + 1))
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for name, result in report.strategies.items():
        counts = Counter(record.invoked_count for record in result.per_query)
        total = len(result.per_query)
        ax.plot(xs, [counts.get(x, 0) / total for x in xs], marker="o", label=name)
    ax.set_xlabel("agents invoked")
    ax.set_ylabel("fraction of queries")
    ax.set_title("Invocation count distribution")
    ax.set_xticks(xs)
    ax.set_ylim(bottom=0.0)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)


def _figure_comparison(report: ExperimentReport, path: Path) -> None:
    names = list(report.strategies)
    xs = range(len(names))
    fig, (ax_acc, ax_avg) = plt.subplots(1, 2, figsize=(10.0, 4.2))
    accuracies = [result.accuracy for result in report.strategies.values()]
    ax_acc.bar(list(xs), [0.0 if a is None else a for a in accuracies], color="tab:blue")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.0)
    ax_acc.set_title("Accuracy")
    ax_avg.bar(list(xs), [result.avg_agents for result in report.strategies.values()],
               color="tab:orange")
    ax_avg.set_ylabel("avg agents invoked")
    ax_avg.set_title("Invocation cost")
    for ax in (ax_acc, ax_avg):
        ax.set_xticks(list(xs))
        ax.set_xticklabels(names, rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)


def write_report(
    report: ExperimentReport, out_dir: str | Path, *, figures: bool = True
) -> list[Path]:
    """Write report.json, comparison.tsv, per-strategy audit logs, and figures.

    Output bytes depend only on the report contents, so identical runs produce
    identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out / REPORT_BASENAME
    blob = json.dumps(report_to_dict(report), indent=2, sort_keys=True, ensure_ascii=False)
    report_path.write_text(blob + "\n", encoding="utf-8")
    written.append(report_path)

    table_path = out / TABLE_BASENAME
    _write_table(report, table_path)
    written.append(table_path)

    for name, result in report.strategies.items():
        audit_path = out / f"audit-{name}.jsonl"
        _write_audit(result, audit_path)
        written.append(audit_path)

    if figures:
        for fname, renderer in (
            ("invocation_distribution.png", _figure_invocations),
            ("strategy_comparison.png", _figure_comparison),
        ):
            figure_path = out / fname
            renderer(report, figure_path)
            written.append(figure_path)
    return written
