"""Experiment orchestration: config, training loops, reports.

A run is deterministic for a fixed config and seed: parameter init,
epoch shuffling, negative sampling and the random baseline all draw
from generators derived from the config seed, and report JSON is
emitted with sorted keys. Repeat runs produce byte-identical reports
except for the wall-clock duration field.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import models
from .errors import ConfigError, DataError, NumericError, SplitError
from .graph import TemporalGraph, parse_edge_list
from .metrics import (
    MetricReport,
    SampleMetrics,
    accuracy,
    aggregate,
    evaluate_sequences,
    report_to_csv,
    report_to_json,
)
from .motif import DatasetSplit, IopSample, build_dataset, chronological_split, random_split
from .nn import ModelParams, adam_step
from .seqspace import EdgeVocab, perm_to_index, tokens_to_str, vocab_for

OUTPUT_ROOT_ENV = "IOPKIT_OUT_ROOT"

MODEL_KINDS = (
    "classifier",
    "sequence",
    "sequence-perm",
    "time-all",
    "time-t",
    "dyn-emb",
    "dyn-emb-projected",
    "random-baseline",
)
POOLING_MODES = ("concat", "mean")
SPLIT_MODES = ("chronological", "random")
SPLIT_RATIOS = (0.8, 0.1, 0.1)
PREFIX_SIZES = (50, 100, 150, 200)

TAT_KINDS = ("classifier", "sequence", "sequence-perm", "time-all", "time-t")
DYN_KINDS = ("dyn-emb", "dyn-emb-projected")


@dataclass
class ExperimentConfig:
    dataset: str
    n: int = 3
    k: int = 1
    kind: str = "classifier"
    pooling: str = "concat"
    dim: int = 128
    hidden: int = 128
    time_dim: int | None = None
    epochs: int = 50
    lr: float = 1e-3
    seed: int = 0
    split: str = "chronological"
    out: str = ""
    t: int | None = None
    dyn_epochs: int = 1
    exclude_tied: bool = False
    pad_rank: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        if self.pooling not in POOLING_MODES:
            raise ConfigError(f"unknown pooling {self.pooling!r}; choose from {POOLING_MODES}")
        if self.split not in SPLIT_MODES:
            raise ConfigError(f"unknown split mode {self.split!r}; choose from {SPLIT_MODES}")
        if self.n < 3:
            raise ConfigError(f"clique size must be >= 3, got {self.n}")
        if self.k < 0:
            raise ConfigError(f"hop count must be >= 0, got {self.k}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.dim < 1 or self.hidden < 1:
            raise ConfigError("dimensions must be positive")
        m = self.n * (self.n - 1) // 2
        if self.kind == "time-t":
            if self.t is None:
                raise ConfigError("kind time-t needs a timestep t")
            if not 1 <= self.t <= m:
                raise ConfigError(f"t={self.t} out of range [1, {m}]")
        if not self.out:
            self.out = os.environ.get(OUTPUT_ROOT_ENV, "runs")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_BOOL_KEYS = {"exclude_tied", "pad_rank"}
_INT_KEYS = {"n", "k", "dim", "hidden", "time_dim", "epochs", "seed", "t", "dyn_epochs"}
_FLOAT_KEYS = {"lr"}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' comments and blanks are skipped."""
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def coerce_config(values: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    if "dataset" not in values:
        raise ConfigError("config needs a dataset path")
    coerced: dict = {}
    for key, value in values.items():
        if value is None or (isinstance(value, str) and value.lower() in ("", "none")):
            coerced[key] = None
        elif key in _BOOL_KEYS:
            if isinstance(value, bool):
                coerced[key] = value
            elif value.lower() in ("true", "1", "yes"):
                coerced[key] = True
            elif value.lower() in ("false", "0", "no"):
                coerced[key] = False
            else:
                raise ConfigError(f"bad boolean for {key}: {value!r}")
        elif key in _INT_KEYS:
            coerced[key] = int(value)
        elif key in _FLOAT_KEYS:
            coerced[key] = float(value)
        else:
            coerced[key] = value
    return ExperimentConfig(**coerced)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text())
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return coerce_config(values)


@dataclass
class RunRecord:
    config: dict
    curve: list[dict]
    selected_epoch: int
    test_report: MetricReport
    prefix_accuracy: dict | None = None
    duration_s: float = 0.0
    status: str = "ok"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "config": self.config,
            "curve": self.curve,
            "selected_epoch": self.selected_epoch,
            "test": self.test_report.as_dict(),
            "prefix_accuracy": self.prefix_accuracy,
            "duration_s": self.duration_s,
        }


def split_dataset(samples: list[IopSample], config: ExperimentConfig) -> DatasetSplit:
    if config.exclude_tied:
        samples = [s for s in samples if not s.tied]
    if config.split == "chronological":
        return chronological_split(samples, SPLIT_RATIOS)
    return random_split(samples, seed=config.seed, ratios=SPLIT_RATIOS)


class Run:
    """One experiment instance; owns its parameters and RNG streams."""

    def __init__(self, config: ExperimentConfig, split: DatasetSplit, graph: TemporalGraph | None):
        for name, part in zip(("train", "validation", "test"), split):
            if not part:
                raise SplitError(f"{name} partition is empty")
        self.config = config
        self.split = split
        self.graph = graph
        self.vocab: EdgeVocab = vocab_for(config.n)
        self.cfg = models.EncoderConfig(dim=config.dim, time_dim=config.time_dim)
        self.params = ModelParams(seed=config.seed)
        self.shuffle_rng = np.random.default_rng([config.seed, 1])
        self.baseline_rng = np.random.default_rng([config.seed, 2])
        self.neg_rng = np.random.default_rng([config.seed, 3])
        self.table: models.DynEmbeddingTable | None = None
        self.scaler: models.DtScaler | None = None
        self.test_dts: np.ndarray | None = None
        self.predictions: list[dict] = []
        self._build()

    # -- setup ---------------------------------------------------------

    def _build(self) -> None:
        c = self.config
        m = self.vocab.size
        ctx_dim = c.n * c.dim if c.pooling == "concat" else c.dim
        all_samples = self.split.train + self.split.validation + self.split.test
        if c.kind in TAT_KINDS:
            models.init_encoder(self.params, self.cfg, models.max_subgraph_nodes(all_samples))
        if c.kind == "classifier":
            models.init_classifier(self.params, ctx_dim, self.vocab.num_classes, c.hidden)
        elif c.kind in ("sequence", "sequence-perm"):
            models.init_decoder(self.params, ctx_dim, m, c.dim)
        elif c.kind in ("time-all", "time-t"):
            models.init_timestep(self.params, ctx_dim, m, c.n, c.hidden)
        elif c.kind in DYN_KINDS:
            if self.graph is None:
                raise ConfigError(f"kind {c.kind} needs the full event stream")
            models.init_dyn(self.params, c.dim)
            models.init_classifier(
                self.params, c.n * c.dim, self.vocab.num_classes, c.hidden, prefix="dyncls"
            )
            self.table = models.init_dyn_table(self.graph.nodes, c.dim, seed=c.seed)
            if c.kind == "dyn-emb-projected":
                self.test_dts = models.assign_test_elapsed_times(
                    len(self.split.test), seed=c.seed
                )

    def _train_dyn_embeddings(self) -> None:
        """Stage 1 for dyn kinds: link-prediction training over every
        event up to the end of the training period; the embedding table
        is frozen afterwards."""
        c = self.config
        cutoff = max(s.completion_time for s in self.split.train)
        events = tuple(e for e in self.graph.events if e.t <= cutoff)
        if not events:
            raise DataError("no events before the split time point")
        self.scaler = models.fit_dt_scaler(events)
        nodes = sorted(self.graph.nodes)
        adj = {v: set() for v in nodes}
        for u, v in self.graph.static_edges:
            adj[u].add(v)
            adj[v].add(u)
        for _ in range(c.dyn_epochs):
            # each pass replays the stream; embeddings carry over
            for event in events:
                dt_u = self.scaler.scale(models.node_elapsed(self.table, event.u, event.t))
                dt_v = self.scaler.scale(models.node_elapsed(self.table, event.v, event.t))
                neg = self._sample_non_neighbor(event.u, adj, nodes)
                i, j = self.table.index[event.u], self.table.index[event.v]
                loss = models.dyn_event_loss(
                    self.params,
                    self.table.emb[i],
                    self.table.emb[j],
                    self.table.emb[self.table.index[neg]],
                    dt_u,
                    dt_v,
                )
                self._check_finite(loss.item())
                self.params.zero_grad()
                loss.backward()
                adam_step(self.params, c.lr)
                models.dyn_update(self.table, event, self.params, self.scaler)

    def _sample_non_neighbor(self, u: int, adj: dict[int, set[int]], nodes: list[int]) -> int:
        for _ in range(100):
            w = nodes[int(self.neg_rng.integers(0, len(nodes)))]
            if w != u and w not in adj[u]:
                return w
        # dense corner: fall back to any other node
        for w in nodes:
            if w != u:
                return w
        raise DataError("graph has a single node; cannot sample negatives")

    # -- training ------------------------------------------------------

    def _check_finite(self, value: float) -> None:
        if not np.isfinite(value):
            raise NumericError(
                f"non-finite loss in kind={self.config.kind} at step {self.params.step_count}"
            )

    def _sample_loss(self, sample: IopSample):
        c = self.config
        if c.kind == "classifier":
            return models.classifier_loss(
                self.params, sample, self.cfg, c.pooling, perm_to_index(sample.label)
            )
        if c.kind in ("sequence", "sequence-perm"):
            return models.sequence_loss(
                self.params, sample, self.cfg, c.pooling, sample.label.token_ids()
            )
        if c.kind == "time-all":
            return models.timestep_loss(self.params, sample, self.cfg, c.pooling)
        if c.kind == "time-t":
            return models.timestep_loss(self.params, sample, self.cfg, c.pooling, only_t=c.t)
        if c.kind in DYN_KINDS:
            context = models.dyn_context(self.table, sample)
            return models.dyn_classifier_loss(self.params, context, perm_to_index(sample.label))
        raise ConfigError(f"kind {c.kind} is not trainable")

    def predict(self, sample: IopSample, test_index: int | None = None) -> list[int]:
        c = self.config
        if c.kind == "classifier":
            return models.predict_classifier(self.params, sample, self.cfg, c.pooling, self.vocab)
        if c.kind in ("sequence", "sequence-perm"):
            return models.predict_sequence(
                self.params, sample, self.cfg, c.pooling, self.vocab,
                constrained=c.kind == "sequence-perm",
            )
        if c.kind == "time-all":
            return models.predict_timestep_sequence(
                self.params, sample, self.cfg, c.pooling, self.vocab
            )
        if c.kind == "time-t":
            return models.predict_timestep_sequence(
                self.params, sample, self.cfg, c.pooling, self.vocab, only_t=c.t
            )
        if c.kind in DYN_KINDS:
            dt = None
            if c.kind == "dyn-emb-projected" and test_index is not None:
                dt = float(self.test_dts[test_index])
            return models.predict_dyn_classifier(
                self.params, self.table, sample, self.vocab, dt_scaled=dt
            )
        if c.kind == "random-baseline":
            return models.random_order_baseline(self.vocab, self.baseline_rng).token_ids()
        raise ConfigError(f"unknown kind {c.kind}")

    def target_ids(self, sample: IopSample) -> list[int]:
        ids = sample.label.token_ids()
        if self.config.kind == "time-t":
            return [ids[self.config.t - 1]]
        return ids

    def _split_accuracy(self, part: list[IopSample]) -> float:
        hits = [accuracy(self.predict(s), self.target_ids(s)) for s in part]
        return sum(hits) / len(hits)

    def train(self) -> RunRecord:
        started = time.monotonic()
        c = self.config
        curve: list[dict] = []
        if c.kind == "random-baseline":
            selected = 0
        else:
            if c.kind in DYN_KINDS:
                self._train_dyn_embeddings()
            best = None  # (val_accuracy, epoch, snapshot)
            order = np.arange(len(self.split.train))
            for epoch in range(1, c.epochs + 1):
                self.shuffle_rng.shuffle(order)
                total = 0.0
                for i in order:
                    loss = self._sample_loss(self.split.train[int(i)])
                    self._check_finite(loss.item())
                    total += loss.item()
                    self.params.zero_grad()
                    loss.backward()
                    adam_step(self.params, c.lr)
                train_acc = self._split_accuracy(self.split.train)
                val_acc = self._split_accuracy(self.split.validation)
                curve.append(
                    {
                        "epoch": epoch,
                        "train_loss": total / len(self.split.train),
                        "train_accuracy": train_acc,
                        "val_accuracy": val_acc,
                    }
                )
                if best is None or val_acc > best[0]:
                    best = (val_acc, epoch, self.params.copy_data())
            self.params.load_data(best[2])
            selected = best[1]
        records = self._evaluate_test()
        return RunRecord(
            config=c.as_dict(),
            curve=curve,
            selected_epoch=selected,
            test_report=aggregate(records),
            prefix_accuracy=self._prefix_accuracy(records) if c.kind in DYN_KINDS else None,
            duration_s=time.monotonic() - started,
        )

    def _evaluate_test(self) -> list[SampleMetrics]:
        records = []
        self.predictions = []
        for i, sample in enumerate(self.split.test):
            pred = self.predict(sample, test_index=i)
            target = self.target_ids(sample)
            records.append(evaluate_sequences(pred, target, pad_rank=self.config.pad_rank))
            self.predictions.append(
                {
                    "sample": i,
                    "clique": list(sample.clique),
                    "pred": tokens_to_str([self.vocab.token(t) for t in pred]),
                    "target": tokens_to_str([self.vocab.token(t) for t in target]),
                }
            )
        return records

    def _prefix_accuracy(self, records: list[SampleMetrics]) -> dict:
        """Accuracy over chronological test prefixes (embedding staleness)."""
        out = {}
        for size in PREFIX_SIZES:
            if size <= len(records):
                out[str(size)] = sum(r.accuracy for r in records[:size]) / size
        out["all"] = sum(r.accuracy for r in records) / len(records)
        return out


def train_loop(
    config: ExperimentConfig, split: DatasetSplit, graph: TemporalGraph | None = None
) -> RunRecord:
    """Train the configured model and evaluate the best-validation epoch.

    The selected epoch maximises validation accuracy (ties go to the
    earliest epoch); test metrics come from that checkpoint.
    """
    return Run(config, split, graph).train()


def _fresh_run_dir(config: ExperimentConfig) -> Path:
    stem = Path(config.dataset).stem or "dataset"
    tag = f"{config.kind}-{stem}-n{config.n}-s{config.seed}"
    stamp = time.strftime("%Y%m%d-%H%M%S")
    root = Path(config.out)
    root.mkdir(parents=True, exist_ok=True)
    for suffix in ("",) + tuple(f"-{i}" for i in range(1, 1000)):
        candidate = root / f"{tag}-{stamp}{suffix}"
        if not candidate.exists():
            candidate.mkdir()
            return candidate
    raise ConfigError(f"cannot create a fresh run directory under {root}")


def emit_report(record: RunRecord, run_dir, predictions: list[dict] | None = None) -> None:
    """Write run.json, metrics.json/.csv, curve.csv and predictions.jsonl."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "run.json").write_text(json.dumps(record.as_dict(), sort_keys=True, indent=2))
    (run_dir / "metrics.json").write_text(report_to_json(record.test_report))
    (run_dir / "metrics.csv").write_text(report_to_csv(record.test_report))
    curve_lines = ["epoch,train_loss,train_accuracy,val_accuracy"]
    for r in record.curve:
        curve_lines.append(
            f"{r['epoch']},{r['train_loss']!r},{r['train_accuracy']!r},{r['val_accuracy']!r}"
        )
    (run_dir / "curve.csv").write_text("\n".join(curve_lines) + "\n")
    if predictions is not None:
        with open(run_dir / "predictions.jsonl", "w") as fh:
            for row in predictions:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def run_experiment(config: ExperimentConfig) -> Path:
    """Full pipeline: parse, mine, split, train, emit. Returns the run dir."""
    run_dir = _fresh_run_dir(config)
    try:
        g = parse_edge_list(Path(config.dataset).read_text())
        samples = build_dataset(g, config.n, config.k)
        split = split_dataset(samples, config)
        run = Run(config, split, graph=g)
        record = run.train()
        emit_report(record, run_dir, predictions=run.predictions)
        extra = None
        if config.kind in DYN_KINDS:
            extra = {
                "emb": run.table.emb,
                "last_update": run.table.last_update,
                "seen": run.table.seen,
                "dt_stats": np.array([run.scaler.mean, run.scaler.std]),
            }
        run.params.save(run_dir / "checkpoint.npz", extra=extra)
        (run_dir / "config.txt").write_text(
            "\n".join(f"{k} = {v}" for k, v in sorted(config.as_dict().items()) if v is not None)
            + "\n"
        )
        return run_dir
    except Exception as exc:
        (run_dir / "run.json").write_text(
            json.dumps(
                {"status": "error", "error": f"{type(exc).__name__}: {exc}"},
                sort_keys=True,
                indent=2,
            )
        )
        raise


def evaluate_checkpoint(
    checkpoint_path, config: ExperimentConfig, part: str = "test"
) -> MetricReport:
    """Re-score a saved checkpoint on a dataset partition."""
    if part not in ("train", "validation", "test"):
        raise ConfigError(f"unknown split partition {part!r}")
    g = parse_edge_list(Path(config.dataset).read_text())
    samples = build_dataset(g, config.n, config.k)
    split = split_dataset(samples, config)
    run = Run(config, split, graph=g)
    params_data, state = ModelParams.read_checkpoint(checkpoint_path)
    run.params.load_data(params_data)
    if run.table is not None and "emb" in state:
        run.table.emb = state["emb"]
        run.table.last_update = state["last_update"]
        run.table.seen = state["seen"].astype(bool)
        run.scaler = models.DtScaler(
            mean=float(state["dt_stats"][0]), std=float(state["dt_stats"][1])
        )
    chosen = {"train": split.train, "validation": split.validation, "test": split.test}[part]
    records = []
    for i, sample in enumerate(chosen):
        pred = run.predict(sample, test_index=i if part == "test" else None)
        records.append(
            evaluate_sequences(pred, run.target_ids(sample), pad_rank=config.pad_rank)
        )
    return aggregate(records)
