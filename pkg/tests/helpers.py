"""Shared fixtures-by-hand for the test suite."""

from __future__ import annotations

import numpy as np

from iopkit import models, motif, nn, seqspace
from iopkit.graph import TemporalGraph


def triangle_graph(t12=5, t23=7, t13=9, extra=()):
    """A 3-clique with configurable first-interaction times."""
    events = [(1, 2, t12), (2, 3, t23), (1, 3, t13)]
    events.extend(extra)
    return TemporalGraph.from_events(events)


def random_check_instance(seed: int, n: int = 3) -> motif.IopSample:
    """A clique plus a two-edge pendant with random distinct times."""
    rng = np.random.default_rng([seed, 17])
    events = []
    times = rng.permutation(20)[: n * (n - 1) // 2 + 2]
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            events.append((i, j, int(times[k])))
            k += 1
    events.append((n - 1, n, int(times[k])))
    k += 1
    events.append((0, n, int(times[k])))
    g = TemporalGraph.from_events(events, extra_nodes=range(n + 1))
    return motif.build_dataset(g, n, 1)[0]


GRAD_CHECK_EPS = {
    "classifier": 1e-3,
    "sequence": 2.5e-4,
    "timestep": 5e-4,
    "dyn": 1e-5,
}


def build_family_check(family: str, i: int):
    """(params, loss closure) for one random instance of a model family."""
    if family == "dyn":
        p = nn.ModelParams(seed=1000 + i)
        models.init_dyn(p, 6)
        rng = np.random.default_rng([2000, i])
        e_u, e_v, e_neg = rng.normal(size=6), rng.normal(size=6), rng.normal(size=6)
        dt_u, dt_v = float(rng.normal()), float(rng.normal())
        return p, (lambda: models.dyn_event_loss(p, e_u, e_v, e_neg, dt_u, dt_v))
    sample = random_check_instance(i)
    vocab = seqspace.vocab_for(3)
    cfg = models.EncoderConfig(dim=4, time_dim=4)
    p = nn.ModelParams(seed=100 + i)
    models.init_encoder(p, cfg, sample.subgraph.num_nodes)
    ctx_dim = 3 * cfg.dim
    if family == "classifier":
        models.init_classifier(p, ctx_dim, vocab.num_classes, hidden=6)
        cls = seqspace.perm_to_index(sample.label)
        return p, (lambda: models.classifier_loss(p, sample, cfg, "concat", cls))
    if family == "sequence":
        models.init_decoder(p, ctx_dim, vocab.size, cfg.dim)
        ids = sample.label.token_ids()
        return p, (lambda: models.sequence_loss(p, sample, cfg, "concat", ids))
    if family == "timestep":
        models.init_timestep(p, ctx_dim, vocab.size, 3, hidden=6)
        return p, (lambda: models.timestep_loss(p, sample, cfg, "concat"))
    raise ValueError(family)
