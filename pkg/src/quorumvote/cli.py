"""Command-line front end: trace generation, experiment runs, verification.

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 oracle
mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .agents import (
    build_http_pool,
    build_replay_pool,
    build_simulated_pool,
    generate_trace,
    load_endpoints,
    load_profiles,
    load_trace,
    write_trace,
)
from .confidence import DEFAULT_COLD_START_PRIOR, historical_reliability
from .core import (
    DEFAULT_BUFFER_CAPACITY,
    DEFAULT_EMBEDDING_DIM,
    ConfigError,
    QuorumVoteError,
    StateFormatError,
    StateVersionError,
    load_state,
    save_state,
)
from .harness import RunSettings, load_dataset, oracle_check, parse_strategies, run_experiment
from .report import load_report, render_table, write_report

_CONFIG_KEYS = {
    "dataset",
    "trace",
    "profiles",
    "endpoints",
    "strategies",
    "seed",
    "capacity",
    "dim",
    "prior",
    "laplace",
    "numeric_answers",
    "parallel",
    "prune_impossible",
    "state_in",
    "state_out",
    "out",
    "figures",
}

_MISMATCH_PRINT_CAP = 20


def _load_config(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config from {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"config {path} has unknown keys {sorted(unknown)}")
    return data


def _setting(args: argparse.Namespace, config: dict, key: str, default=None):
    """Command-line value if given, else config-file value, else default."""
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    return value


def _strategy_tokens(value) -> list[str]:
    if value is None:
        return []
    items = value if isinstance(value, list) else [value]
    tokens = []
    for item in items:
        if not isinstance(item, str):
            raise ConfigError(f"strategy tokens must be strings, got {item!r}")
        tokens.extend(part for part in item.split(",") if part.strip())
    return tokens


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _cmd_gen_trace(args: argparse.Namespace) -> int:
    numeric = bool(args.numeric_answers)
    profiles = load_profiles(args.profiles)
    queries = load_dataset(args.dataset, numeric=numeric)
    backends = build_simulated_pool(profiles, args.seed, numeric=numeric)
    records = generate_trace(queries, backends)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(out, records)
    print(f"wrote {len(records)} trace records for {len(queries)} queries x {len(backends)} agents")
    print(f"{out} sha256 {_sha256_file(out)}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config) if args.config else {}

    dataset_path = _setting(args, config, "dataset")
    if not dataset_path:
        raise ConfigError("a dataset is required (--dataset or config 'dataset')")
    sources = {
        name: value
        for name in ("trace", "profiles", "endpoints")
        if (value := _setting(args, config, name))
    }
    if len(sources) != 1:
        raise ConfigError(
            "exactly one agent source is required: --trace, --profiles, or --endpoints"
        )

    seed = int(_setting(args, config, "seed", 0))
    numeric = bool(_setting(args, config, "numeric_answers", False))
    tokens = _strategy_tokens(getattr(args, "strategies", None)) or _strategy_tokens(
        config.get("strategies")
    )
    if not tokens:
        raise ConfigError("at least one strategy is required (--strategies or config 'strategies')")
    settings = RunSettings(
        strategies=parse_strategies(tokens),
        seed=seed,
        capacity=int(_setting(args, config, "capacity", DEFAULT_BUFFER_CAPACITY)),
        dim=int(_setting(args, config, "dim", DEFAULT_EMBEDDING_DIM)),
        prior=float(_setting(args, config, "prior", DEFAULT_COLD_START_PRIOR)),
        laplace=bool(_setting(args, config, "laplace", False)),
        numeric=numeric,
        parallel=int(_setting(args, config, "parallel", 1)),
        prune_impossible=bool(_setting(args, config, "prune_impossible", False)),
    )
    if settings.parallel < 1:
        raise ConfigError(f"parallel must be >= 1, got {settings.parallel}")

    queries = load_dataset(dataset_path, numeric=numeric)
    source_kind, source_path = next(iter(sources.items()))
    if source_kind == "trace":
        backends = build_replay_pool(load_trace(source_path), numeric=numeric)
    elif source_kind == "profiles":
        backends = build_simulated_pool(load_profiles(source_path), seed, numeric=numeric)
    else:
        backends = build_http_pool(load_endpoints(source_path), numeric=numeric)

    state_in = _setting(args, config, "state_in")
    initial_state = load_state(state_in) if state_in else None

    report = run_experiment(queries, backends, settings, initial_state=initial_state)

    out_dir = Path(_setting(args, config, "out", "out"))
    figures = _setting(args, config, "figures", True)
    if args.no_figures:
        figures = False
    written = write_report(report, out_dir, figures=bool(figures))

    state_out = _setting(args, config, "state_out")
    if state_out:
        learned = {
            name: result.final_state
            for name, result in report.strategies.items()
            if result.final_state is not None
        }
        if not learned:
            raise ConfigError("--state-out set, but no requested strategy updates state")
        base = Path(state_out)
        for name, state in learned.items():
            path = base if len(learned) == 1 else base.with_name(f"{base.stem}-{name}{base.suffix}")
            save_state(state, path)
            written.append(path)

    print(render_table(report))
    print(f"config digest {report.config_digest}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    trace = load_trace(args.trace)
    report = load_report(args.report)
    verdict = oracle_check(trace, report)
    print(f"{len(verdict.mismatches)} mismatches across {verdict.checked} records")
    for line in verdict.mismatches[:_MISMATCH_PRINT_CAP]:
        print(f"  {line}")
    if len(verdict.mismatches) > _MISMATCH_PRINT_CAP:
        print(f"  ... and {len(verdict.mismatches) - _MISMATCH_PRINT_CAP} more")
    return 0 if verdict.ok else 4


def _cmd_show_state(args: argparse.Namespace) -> int:
    state = load_state(args.state_in)
    rows = [("agent", "matched", "participated", "reliability", "buffer")]
    for index, phi in enumerate(state.agents):
        rows.append(
            (
                str(index),
                str(phi.c),
                str(phi.v),
                f"{historical_reliability(phi):.4f}",
                f"{len(phi.buffer)}/{phi.buffer.capacity}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.rjust(width) for cell, width in zip(row, widths)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quorumvote",
        description="Majority voting with reliability-ranked agents and quorum early stopping.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-trace", help="materialize simulated answers into a trace file")
    gen.add_argument("--profiles", required=True, help="agent profiles JSON")
    gen.add_argument("--dataset", required=True, help="queries JSONL")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="trace JSONL to write")
    gen.add_argument("--numeric-answers", action="store_true", default=None,
                     help="canonicalize answers as decimal numbers when possible")
    gen.set_defaults(func=_cmd_gen_trace)

    run = sub.add_parser("run", help="run strategies over a dataset and write a report")
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("--dataset", help="queries JSONL")
    run.add_argument("--trace", help="agent source: recorded trace JSONL")
    run.add_argument("--profiles", help="agent source: simulation profiles JSON")
    run.add_argument("--endpoints", help="agent source: HTTP endpoints JSON")
    run.add_argument("--strategies", nargs="+", help="strategy tokens, e.g. simple-mv ems-rel")
    run.add_argument("--seed", type=int)
    run.add_argument("--capacity", type=int, help="semantic buffer capacity per agent")
    run.add_argument("--dim", type=int, help="embedding dimension")
    run.add_argument("--prior", type=float, help="cold-start reliability prior")
    run.add_argument("--laplace", action="store_true", default=None,
                     help="Laplace-smooth historical reliability")
    run.add_argument("--numeric-answers", action="store_true", default=None)
    run.add_argument("--parallel", type=int, help="initial-batch dispatch concurrency")
    run.add_argument("--prune-impossible", action="store_true", default=None,
                     help="stop invoking once no answer can reach the threshold")
    run.add_argument("--state-in", help="confidence state snapshot to warm-start from")
    run.add_argument("--state-out", help="write learned confidence state(s) here")
    run.add_argument("--out", help="output directory (default: out)")
    run.add_argument("--no-figures", action="store_true", help="skip PNG figure rendering")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify", help="recheck a report against its trace")
    verify.add_argument("--trace", required=True, help="trace JSONL the run consumed")
    verify.add_argument("--report", required=True, help="report.json written by run")
    verify.set_defaults(func=_cmd_verify)

    show = sub.add_parser("show-state", help="pretty-print a confidence state snapshot")
    show.add_argument("--state-in", required=True, help="state snapshot JSON")
    show.set_defaults(func=_cmd_show_state)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StateFormatError, StateVersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QuorumVoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
