"""The four model families for interaction-order prediction.

* a temporal-attention encoder over the sample subgraph feeding either a
  permutation classifier or a GRU sequence decoder (optionally with
  per-step no-repeat masking so outputs are permutations),
* a timestep-conditioned head that predicts which two clique nodes
  interact at a given step,
* homogeneous dynamic node embeddings trained on binary link prediction,
  with an elementwise temporal projection.

Everything runs on the nn module's reverse-mode tensors; prediction
paths read plain arrays off the same graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InvalidSampleError, TimeOrderError
from .graph import EdgeEvent, TemporalGraph, canonical_pair, first_interaction_times, static_projection
from .motif import IopSample
from .nn import (
    ModelParams,
    Tensor,
    TimeEncoding,
    attention_aggregate,
    bce_logits,
    concat,
    cross_entropy_logits,
    dot,
    gru_step,
    init_gru,
    init_mlp,
    mlp_forward,
    row,
    softmax,
    stack_scalars,
    time_encode,
    tsum,
)
from .seqspace import EdgeVocab, PermutationLabel, index_to_perm, permutation_mask


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 128
    time_dim: int | None = None
    layers: int = 2
    base: float = 10000.0

    @property
    def te_dim(self) -> int:
        return self.dim if self.time_dim is None else self.time_dim


@dataclass
class NodeEmbeddings:
    """One vector per clique node, in sorted clique-node order."""

    nodes: tuple[int, ...]
    vectors: list[Tensor]


def init_encoder(p: ModelParams, cfg: EncoderConfig, max_local_nodes: int) -> None:
    """Create encoder parameters sized for the largest subgraph in play.

    Node features are learned per subgraph-local index (the node's rank
    within the sorted subgraph node list), so the table is shared across
    samples regardless of global ids.
    """
    p.add("feat", (max_local_nodes, cfg.dim))
    kv_dim = cfg.dim + cfg.te_dim
    for layer in range(cfg.layers):
        p.add(f"enc{layer}.Wq", (cfg.dim, cfg.dim))
        p.add(f"enc{layer}.bq", (cfg.dim,), zero=True)
        p.add(f"enc{layer}.Wk", (cfg.dim, kv_dim))
        p.add(f"enc{layer}.bk", (cfg.dim,), zero=True)
        p.add(f"enc{layer}.Wv", (cfg.dim, kv_dim))
        p.add(f"enc{layer}.bv", (cfg.dim,), zero=True)


def max_subgraph_nodes(samples: list[IopSample]) -> int:
    return max((s.subgraph.num_nodes for s in samples), default=0)


def _edge_time_ranks(sub: TemporalGraph) -> dict[tuple[int, int], int]:
    """Rank subgraph edges by first-interaction time, ties by pair order."""
    first = first_interaction_times(sub)
    ordered = sorted(first.items(), key=lambda kv: (kv[1], kv[0]))
    return {pair: rank for rank, (pair, _) in enumerate(ordered)}


def encode_with_features(
    sample: IopSample,
    features: dict[int, Tensor],
    p: ModelParams,
    cfg: EncoderConfig,
) -> NodeEmbeddings:
    """Attention aggregation with an explicit node -> feature mapping.

    Node ids never enter the arithmetic; only first-interaction ranks
    and the attached features do, so relabelling nodes while carrying
    their features (and preserving tie order) leaves outputs unchanged.
    """
    sub = sample.subgraph
    adj = static_projection(sub)
    for v in sample.clique:
        if not adj.get(v):
            raise InvalidSampleError(f"clique node {v} is isolated in its subgraph")
    enc = TimeEncoding(d=cfg.te_dim, base=cfg.base)
    ranks = _edge_time_ranks(sub)
    te = {pair: Tensor(time_encode(rank, enc)) for pair, rank in ranks.items()}
    h = dict(features)
    for layer in range(cfg.layers):
        wq, bq = p[f"enc{layer}.Wq"], p[f"enc{layer}.bq"]
        wk, bk = p[f"enc{layer}.Wk"], p[f"enc{layer}.bk"]
        wv, bv = p[f"enc{layer}.Wv"], p[f"enc{layer}.bv"]
        nxt: dict[int, Tensor] = {}
        for u in sorted(h):
            query = wq @ h[u] + bq
            keys = []
            values = []
            for v in sorted(adj[u]):
                kv = concat([h[v], te[canonical_pair(u, v)]])
                keys.append(wk @ kv + bk)
                values.append(wv @ kv + bv)
            nxt[u] = attention_aggregate(query, keys, values).tanh()
        h = nxt
    clique = tuple(sorted(sample.clique))
    return NodeEmbeddings(nodes=clique, vectors=[h[v] for v in clique])


def tat_lite_encode(sample: IopSample, p: ModelParams, cfg: EncoderConfig) -> NodeEmbeddings:
    """Encode a sample using the learned local-index feature table."""
    nodes = sorted(sample.subgraph.nodes)
    table = p["feat"]
    if len(nodes) > table.data.shape[0]:
        raise ConfigError(
            f"subgraph has {len(nodes)} nodes but the feature table holds "
            f"{table.data.shape[0]}; size the encoder with max_subgraph_nodes"
        )
    features = {v: row(table, i) for i, v in enumerate(nodes)}
    return encode_with_features(sample, features, p, cfg)


def pool_context(e: NodeEmbeddings, mode: str) -> Tensor:
    if mode == "concat":
        return concat(e.vectors)
    if mode == "mean":
        return tsum(e.vectors) * (1.0 / len(e.vectors))
    raise ConfigError(f"unknown pooling mode {mode!r}")


# -- permutation classifier ------------------------------------------------


def init_classifier(p: ModelParams, ctx_dim: int, classes: int, hidden: int, prefix: str = "cls") -> None:
    init_mlp(p, ctx_dim, hidden, classes, prefix=prefix)


def classify_permutation(context: Tensor, p: ModelParams, prefix: str = "cls") -> Tensor:
    """Softmax probabilities over the m! orderings."""
    return softmax(mlp_forward(context, p, prefix=prefix))


def classifier_loss(
    p: ModelParams, sample: IopSample, cfg: EncoderConfig, pooling: str, class_index: int
) -> Tensor:
    context = pool_context(tat_lite_encode(sample, p, cfg), pooling)
    return cross_entropy_logits(mlp_forward(context, p, prefix="cls"), class_index)


# -- sequence decoder --------------------------------------------------------


def init_decoder(p: ModelParams, ctx_dim: int, m: int, dim: int, prefix: str = "dec") -> None:
    p.add(f"{prefix}.Winit", (dim, ctx_dim))
    p.add(f"{prefix}.binit", (dim,), zero=True)
    p.add(f"{prefix}.emb", (m + 1, dim))
    init_gru(p, dim, dim, prefix=f"{prefix}.gru")
    p.add(f"{prefix}.Wout", (m, dim))
    p.add(f"{prefix}.bout", (m,), zero=True)


def decode_sequence(
    context: Tensor,
    vocab: EdgeVocab,
    constrained: bool,
    p: ModelParams,
    prefix: str = "dec",
) -> list[int]:
    """Greedy decoding of m token ids from a pooled context vector.

    With the permutation constraint, already-emitted token logits are
    set to -inf each step, which forces the output to be a permutation;
    without it the decoder may repeat tokens.
    """
    m = vocab.size
    h = p[f"{prefix}.Winit"] @ context + p[f"{prefix}.binit"]
    prev = m
    emitted: list[int] = []
    for _ in range(m):
        h = gru_step(h, row(p[f"{prefix}.emb"], prev), p, prefix=f"{prefix}.gru")
        logits = (p[f"{prefix}.Wout"] @ h + p[f"{prefix}.bout"]).data.copy()
        if constrained:
            logits[~permutation_mask(emitted, m)] = -np.inf
        prev = int(np.argmax(logits))
        emitted.append(prev)
    return emitted


def sequence_loss(
    p: ModelParams,
    sample: IopSample,
    cfg: EncoderConfig,
    pooling: str,
    target_ids: list[int],
    prefix: str = "dec",
) -> Tensor:
    """Teacher-forced per-step cross-entropy, averaged over steps."""
    context = pool_context(tat_lite_encode(sample, p, cfg), pooling)
    m = len(target_ids)
    h = p[f"{prefix}.Winit"] @ context + p[f"{prefix}.binit"]
    prev = m
    losses = []
    for gold in target_ids:
        h = gru_step(h, row(p[f"{prefix}.emb"], prev), p, prefix=f"{prefix}.gru")
        logits = p[f"{prefix}.Wout"] @ h + p[f"{prefix}.bout"]
        losses.append(cross_entropy_logits(logits, gold))
        prev = gold
    return stack_scalars(losses).sum() * (1.0 / m)


# -- timestep-conditioned pair prediction -----------------------------------


@dataclass(frozen=True)
class TimestepQuery:
    """Pooled context plus the 1-based step to predict."""

    context: Tensor
    t: int


def init_timestep(p: ModelParams, ctx_dim: int, m: int, n: int, hidden: int, prefix: str = "ts") -> None:
    init_mlp(p, ctx_dim + m, hidden, n, prefix=prefix)


def expand_timestep_samples(
    sample: IopSample, context: Tensor
) -> list[tuple[TimestepQuery, np.ndarray]]:
    """One (query, two-hot node target) record per step of the order."""
    n = sample.n
    records = []
    for t, (i, j) in enumerate(sample.label.tokens, start=1):
        target = np.zeros(n)
        target[i] = 1.0
        target[j] = 1.0
        records.append((TimestepQuery(context=context, t=t), target))
    return records


def _timestep_logits(q: TimestepQuery, p: ModelParams, m: int, prefix: str) -> Tensor:
    if not 1 <= q.t <= m:
        raise ValueError(f"timestep {q.t} out of range [1, {m}]")
    onehot = np.zeros(m)
    onehot[q.t - 1] = 1.0
    return mlp_forward(concat([q.context, Tensor(onehot)]), p, prefix=prefix)


def timestep_predict(q: TimestepQuery, p: ModelParams, m: int, prefix: str = "ts") -> Tensor:
    """Independent per-node sigmoid scores for the t-th interaction."""
    return _timestep_logits(q, p, m, prefix).sigmoid()


def top2_pair(scores: np.ndarray) -> tuple[int, int]:
    """Highest-scoring node pair, ties broken by node order."""
    order = np.argsort(-scores, kind="stable")
    return canonical_pair(int(order[0]), int(order[1]))


def timestep_loss(
    p: ModelParams,
    sample: IopSample,
    cfg: EncoderConfig,
    pooling: str,
    only_t: int | None = None,
    prefix: str = "ts",
) -> Tensor:
    """Mean per-node binary cross-entropy over the sample's step records."""
    context = pool_context(tat_lite_encode(sample, p, cfg), pooling)
    m = sample.label.m
    losses = []
    for query, target in expand_timestep_samples(sample, context):
        if only_t is not None and query.t != only_t:
            continue
        losses.append(bce_logits(_timestep_logits(query, p, m, prefix), target))
    if not losses:
        raise ConfigError(f"timestep {only_t} produced no training records")
    return stack_scalars(losses).sum() * (1.0 / len(losses))


# -- dynamic embeddings ------------------------------------------------------


@dataclass
class DynEmbeddingTable:
    """A single embedding space over all nodes, updated per event."""

    index: dict[int, int]
    emb: np.ndarray
    last_update: np.ndarray
    seen: np.ndarray

    @property
    def dim(self) -> int:
        return self.emb.shape[1]


def init_dyn_table(nodes, dim: int, seed: int) -> DynEmbeddingTable:
    ordered = sorted(nodes)
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(dim)
    return DynEmbeddingTable(
        index={v: i for i, v in enumerate(ordered)},
        emb=rng.uniform(-bound, bound, size=(len(ordered), dim)),
        last_update=np.zeros(len(ordered), dtype=np.int64),
        seen=np.zeros(len(ordered), dtype=bool),
    )


@dataclass(frozen=True)
class DtScaler:
    """Standardises raw elapsed times with training-set statistics."""

    mean: float
    std: float

    def scale(self, dt: float) -> float:
        return (dt - self.mean) / self.std


def node_elapsed(table: DynEmbeddingTable, node: int, t: int) -> float:
    """Raw time since the node's last update; 0 for a first touch."""
    i = table.index[node]
    if not table.seen[i]:
        return 0.0
    if t < table.last_update[i]:
        raise TimeOrderError(
            f"event at t={t} precedes node {node}'s last update at {table.last_update[i]}"
        )
    return float(t - table.last_update[i])


def fit_dt_scaler(events: tuple[EdgeEvent, ...]) -> DtScaler:
    """Standardisation statistics of the two per-event elapsed times.

    Uses the population variance so scaled values have exactly zero mean
    and unit variance over the fitted stream.
    """
    last: dict[int, int] = {}
    dts: list[float] = []
    for e in events:
        for v in (e.u, e.v):
            dts.append(float(e.t - last[v]) if v in last else 0.0)
            last[v] = e.t
    if not dts:
        raise ConfigError("cannot fit elapsed-time statistics on an empty stream")
    arr = np.asarray(dts)
    std = float(arr.std())
    return DtScaler(mean=float(arr.mean()), std=std if std > 0 else 1.0)


def init_dyn(p: ModelParams, dim: int) -> None:
    p.add("dyn.W1", (dim, dim))
    p.add("dyn.W2", (dim, dim))
    p.add("dyn.wt", (dim,), fan_in=dim)
    p.add("dyn.wp", (dim,), fan_in=dim)


def dyn_update(
    table: DynEmbeddingTable, event: EdgeEvent, p: ModelParams, scaler: DtScaler
) -> DynEmbeddingTable:
    """Recurrent update of both endpoint embeddings with shared weights.

    e_u <- tanh(W1 e_u + W2 e_v + w_t dt_u), and symmetrically for v
    with the same weights (one embedding space, undirected events).
    """
    dt_u = scaler.scale(node_elapsed(table, event.u, event.t))
    dt_v = scaler.scale(node_elapsed(table, event.v, event.t))
    i, j = table.index[event.u], table.index[event.v]
    w1, w2, wt = p["dyn.W1"].data, p["dyn.W2"].data, p["dyn.wt"].data
    e_u, e_v = table.emb[i], table.emb[j]
    new_u = np.tanh(w1 @ e_u + w2 @ e_v + wt * dt_u)
    new_v = np.tanh(w1 @ e_v + w2 @ e_u + wt * dt_v)
    table.emb[i] = new_u
    table.emb[j] = new_v
    table.last_update[i] = event.t
    table.last_update[j] = event.t
    table.seen[i] = True
    table.seen[j] = True
    return table


def dyn_project(e: np.ndarray, dt_scaled: float, wp: np.ndarray) -> np.ndarray:
    """Temporal projection: (1 + dt * w_p) elementwise on the embedding."""
    return (1.0 + dt_scaled * wp) * e


def link_score(e_u: np.ndarray, e_v: np.ndarray) -> float:
    """Sigmoid of the dot product; symmetric in its arguments."""
    z = float(np.dot(e_u, e_v))
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    return math.exp(z) / (1.0 + math.exp(z))


def dyn_event_loss(
    p: ModelParams,
    e_u: np.ndarray,
    e_v: np.ndarray,
    e_neg: np.ndarray,
    dt_u: float,
    dt_v: float,
) -> Tensor:
    """Per-event link-prediction loss over current embeddings.

    Scores the projected pair and the recurrently updated pair against
    the observed interaction, and each against a sampled non-neighbour,
    so the projection weights and the update weights both receive
    gradients. Embeddings enter as constants (no backprop through the
    stream history).
    """
    w1, w2 = p["dyn.W1"], p["dyn.W2"]
    wt, wp = p["dyn.wt"], p["dyn.wp"]
    eu, ev, en = Tensor(e_u), Tensor(e_v), Tensor(e_neg)
    proj_u = (wp * dt_u + 1.0) * eu
    proj_v = (wp * dt_v + 1.0) * ev
    new_u = (w1 @ eu + w2 @ ev + wt * dt_u).tanh()
    new_v = (w1 @ ev + w2 @ eu + wt * dt_v).tanh()
    one = np.asarray(1.0)
    zero = np.asarray(0.0)
    terms = [
        bce_logits(dot(proj_u, proj_v), one),
        bce_logits(dot(proj_u, en), zero),
        bce_logits(dot(new_u, new_v), one),
        bce_logits(dot(new_u, en), zero),
    ]
    return stack_scalars(terms).sum() * 0.25


def assign_test_elapsed_times(num_samples: int, seed: int) -> np.ndarray:
    """Sorted standard-normal draws, assigned chronologically to samples."""
    if num_samples < 1:
        raise ValueError(f"need at least one sample, got {num_samples}")
    return np.sort(np.random.default_rng(seed).standard_normal(num_samples))


def random_order_baseline(vocab: EdgeVocab, seed) -> PermutationLabel:
    """Uniformly random permutation of the vocabulary, seeded."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(vocab.size)
    return PermutationLabel(n=vocab.n, tokens=tuple(vocab.token(int(i)) for i in order))


# -- dyn-emb classification glue ---------------------------------------------


def dyn_context(
    table: DynEmbeddingTable,
    sample: IopSample,
    p: ModelParams | None = None,
    dt_scaled: float | None = None,
) -> np.ndarray:
    """Concatenated clique-node embeddings, optionally projected by dt."""
    clique = sorted(sample.clique)
    vecs = []
    for v in clique:
        e = table.emb[table.index[v]]
        if dt_scaled is not None:
            e = dyn_project(e, dt_scaled, p["dyn.wp"].data)
        vecs.append(e)
    return np.concatenate(vecs)


def dyn_classifier_loss(p: ModelParams, context: np.ndarray, class_index: int) -> Tensor:
    return cross_entropy_logits(mlp_forward(Tensor(context), p, prefix="dyncls"), class_index)


def predict_classifier(
    p: ModelParams, sample: IopSample, cfg: EncoderConfig, pooling: str, vocab: EdgeVocab
) -> list[int]:
    context = pool_context(tat_lite_encode(sample, p, cfg), pooling)
    probs = classify_permutation(context, p)
    return index_to_perm(int(np.argmax(probs.data)), vocab).token_ids()


def predict_sequence(
    p: ModelParams,
    sample: IopSample,
    cfg: EncoderConfig,
    pooling: str,
    vocab: EdgeVocab,
    constrained: bool,
) -> list[int]:
    context = pool_context(tat_lite_encode(sample, p, cfg), pooling)
    return decode_sequence(context, vocab, constrained, p)


def predict_timestep_sequence(
    p: ModelParams,
    sample: IopSample,
    cfg: EncoderConfig,
    pooling: str,
    vocab: EdgeVocab,
    only_t: int | None = None,
) -> list[int]:
    """Assemble per-step pair predictions into a token sequence.

    The result has length m (or 1 when only_t is set) and need not be a
    permutation.
    """
    context = pool_context(tat_lite_encode(sample, p, cfg), pooling)
    steps = [only_t] if only_t is not None else range(1, vocab.size + 1)
    out = []
    for t in steps:
        scores = timestep_predict(TimestepQuery(context=context, t=t), p, vocab.size)
        out.append(vocab.id_of(top2_pair(scores.data)))
    return out


def predict_dyn_classifier(
    p: ModelParams,
    table: DynEmbeddingTable,
    sample: IopSample,
    vocab: EdgeVocab,
    dt_scaled: float | None = None,
) -> list[int]:
    context = dyn_context(table, sample, p, dt_scaled)
    logits = mlp_forward(Tensor(context), p, prefix="dyncls")
    return index_to_perm(int(np.argmax(logits.data)), vocab).token_ids()
