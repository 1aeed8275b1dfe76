"""Command-line interface.

Subcommands: ingest (validate + stats), extract (write mined samples),
train (run an experiment from a config file), evaluate (re-score a
checkpoint), report (print a run summary). Exit codes: 0 success,
1 usage/config error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DataError, NumericError
from .graph import parse_edge_list
from .harness import (
    MODEL_KINDS,
    POOLING_MODES,
    SPLIT_MODES,
    coerce_config,
    evaluate_checkpoint,
    load_config,
    run_experiment,
)
from .metrics import report_to_json
from .motif import build_dataset, write_samples


def _add_override_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dataset")
    sub.add_argument("--n", type=int)
    sub.add_argument("--k", type=int)
    sub.add_argument("--kind", choices=MODEL_KINDS)
    sub.add_argument("--pooling", choices=POOLING_MODES)
    sub.add_argument("--dim", type=int)
    sub.add_argument("--hidden", type=int)
    sub.add_argument("--time-dim", dest="time_dim", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--split", choices=SPLIT_MODES)
    sub.add_argument("--out")
    sub.add_argument("--t", type=int)
    sub.add_argument("--dyn-epochs", dest="dyn_epochs", type=int)
    sub.add_argument("--exclude-tied", dest="exclude_tied", action="store_const", const="true")
    sub.add_argument("--pad-rank", dest="pad_rank", action="store_const", const="true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iopkit",
        description="Mine, model and score interaction order in temporal graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate an edge list and print stats")
    p_ingest.add_argument("file")

    p_extract = sub.add_parser("extract", help="mine clique samples to a JSONL file")
    p_extract.add_argument("file")
    p_extract.add_argument("--n", type=int, default=3)
    p_extract.add_argument("--k", type=int, default=1)
    p_extract.add_argument("--out", default="samples.jsonl")

    p_train = sub.add_parser("train", help="run an experiment")
    p_train.add_argument("--config", help="key = value config file")
    _add_override_flags(p_train)

    p_eval = sub.add_parser("evaluate", help="re-score a checkpoint on a split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", default="test", choices=("train", "validation", "test"))
    p_eval.add_argument("--config", help="defaults to config.txt next to the checkpoint")

    p_report = sub.add_parser("report", help="print the summary of a run directory")
    p_report.add_argument("--run-dir", required=True)

    return parser


def _cmd_ingest(args) -> int:
    g = parse_edge_list(Path(args.file).read_text())
    stats = {
        "nodes": g.num_nodes,
        "static_edges": g.num_edges,
        "events": g.num_events,
        "self_loops_dropped": g.self_loops_dropped,
        "t_min": g.t_min,
        "t_max": g.t_max,
    }
    print(json.dumps(stats, sort_keys=True, indent=2))
    return 0


def _cmd_extract(args) -> int:
    g = parse_edge_list(Path(args.file).read_text())
    samples = build_dataset(g, args.n, args.k)
    write_samples(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


_OVERRIDE_KEYS = (
    "dataset", "n", "k", "kind", "pooling", "dim", "hidden", "time_dim",
    "epochs", "lr", "seed", "split", "out", "t", "dyn_epochs",
    "exclude_tied", "pad_rank",
)


def _cmd_train(args) -> int:
    overrides = {key: getattr(args, key) for key in _OVERRIDE_KEYS}
    if args.config:
        config = load_config(args.config, overrides)
    else:
        config = coerce_config({k: v for k, v in overrides.items() if v is not None})
    run_dir = run_experiment(config)
    print(f"run complete: {run_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    checkpoint = Path(args.checkpoint)
    config_path = Path(args.config) if args.config else checkpoint.parent / "config.txt"
    if not config_path.exists():
        raise ConfigError(f"no config found at {config_path}; pass --config")
    config = load_config(config_path)
    report = evaluate_checkpoint(checkpoint, config, part=args.split)
    print(report_to_json(report))
    return 0


def _cmd_report(args) -> int:
    run_json = Path(args.run_dir) / "run.json"
    if not run_json.exists():
        raise DataError(f"no run.json under {args.run_dir}")
    record = json.loads(run_json.read_text())
    if record.get("status") != "ok":
        print(json.dumps(record, sort_keys=True, indent=2))
        return 0
    summary = {
        "kind": record["config"]["kind"],
        "dataset": record["config"]["dataset"],
        "n": record["config"]["n"],
        "seed": record["config"]["seed"],
        "selected_epoch": record["selected_epoch"],
        "test_aggregate": record["test"]["aggregate"],
        "test_count": record["test"]["count"],
        "skipped": record["test"]["skipped"],
        "prefix_accuracy": record.get("prefix_accuracy"),
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
