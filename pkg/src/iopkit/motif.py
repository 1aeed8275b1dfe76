"""Mining clique interaction-order samples from a temporal graph.

A sample is an n-clique of the static projection, the induced temporal
subgraph over its k-hop neighbourhood, and the order in which the
clique's edges first interacted. "n-clique" here means a maximal clique
of size exactly n: a triangle inside a K4 is not a sample at n=3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import floor

import numpy as np

from .errors import ConfigError, InvalidCliqueError, InvalidSampleError, SplitError
from .graph import Pair, TemporalGraph, first_interaction_times, static_projection
from .seqspace import PermutationLabel, label_from_str, label_to_str

DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class IopSample:
    """One clique with its neighbourhood context and ground-truth order."""

    clique: tuple[int, ...]
    subgraph: TemporalGraph
    label: PermutationLabel
    completion_time: int
    tied: bool

    @property
    def n(self) -> int:
        return len(self.clique)


@dataclass(frozen=True)
class DatasetSplit:
    train: list[IopSample]
    validation: list[IopSample]
    test: list[IopSample]

    def __iter__(self):
        yield from (self.train, self.validation, self.test)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.validation), len(self.test))


def _bron_kerbosch(
    r: set[int],
    p: set[int],
    x: set[int],
    adj: dict[int, set[int]],
    out: list[tuple[int, ...]],
) -> None:
    if not p and not x:
        out.append(tuple(sorted(r)))
        return
    # Deterministic pivot: most candidates covered, smallest id on ties.
    pivot = max(sorted(p | x), key=lambda v: len(adj[v] & p))
    for v in sorted(p - adj[pivot]):
        _bron_kerbosch(r | {v}, p & adj[v], x & adj[v], adj, out)
        p = p - {v}
        x = x | {v}


def enumerate_cliques(adj: dict[int, set[int]], n: int) -> list[tuple[int, ...]]:
    """All maximal cliques of size exactly n, sorted canonically.

    Bron-Kerbosch with pivoting over the whole graph, filtered to the
    requested size. Returns an empty list when nothing matches.
    """
    if n < 3:
        raise ConfigError(f"clique size must be >= 3, got {n}")
    maximal: list[tuple[int, ...]] = []
    _bron_kerbosch(set(), set(adj), set(), adj, maximal)
    return sorted(c for c in maximal if len(c) == n)


def khop_subgraph(g: TemporalGraph, nodes: set[int], k: int) -> TemporalGraph:
    """Induced temporal subgraph over everything within k hops of a seed.

    Hops are measured in the static projection; all events among the
    included vertices are retained.
    """
    unknown = nodes - g.nodes
    if unknown:
        raise KeyError(f"unknown node id(s): {sorted(unknown)}")
    if k < 0:
        raise ConfigError(f"hop count must be >= 0, got {k}")
    adj = static_projection(g)
    included = set(nodes)
    frontier = set(nodes)
    for _ in range(k):
        nxt = set()
        for v in frontier:
            nxt |= adj[v] - included
        if not nxt:
            break
        included |= nxt
        frontier = nxt
    events = [e for e in g.events if e.u in included and e.v in included]
    return TemporalGraph.from_events(events, extra_nodes=included)


def interaction_order_label(
    g: TemporalGraph, clique: set[int] | tuple[int, ...]
) -> tuple[PermutationLabel, bool]:
    """Ground-truth edge order of a clique, plus a tie flag.

    Edges are sorted by first-interaction time; simultaneous first
    interactions are broken lexicographically on the canonical local
    pair and reported via the flag.
    """
    members = sorted(clique)
    n = len(members)
    first = first_interaction_times(g)
    timed: list[tuple[int, Pair]] = []
    for i in range(n):
        for j in range(i + 1, n):
            pair = (members[i], members[j])
            if pair not in first:
                raise InvalidCliqueError(f"nodes {pair} never interact; not a clique")
            timed.append((first[pair], (i, j)))
    timed.sort()
    times = [t for t, _ in timed]
    tied = len(set(times)) < len(times)
    label = PermutationLabel(n=n, tokens=tuple(tok for _, tok in timed))
    return label, tied


def build_dataset(g: TemporalGraph, n: int, k: int = 1) -> list[IopSample]:
    """One sample per maximal n-clique, in canonical clique order."""
    adj = static_projection(g)
    samples: list[IopSample] = []
    for clique in enumerate_cliques(adj, n):
        sub = khop_subgraph(g, set(clique), k)
        sub_adj = static_projection(sub)
        if any(not sub_adj[v] for v in clique):
            raise InvalidSampleError(f"clique {clique} has an isolated node in its subgraph")
        label, tied = interaction_order_label(g, clique)
        first = first_interaction_times(g)
        members = sorted(clique)
        completion = max(
            first[(members[i], members[j])] for i in range(n) for j in range(i + 1, n)
        )
        samples.append(
            IopSample(
                clique=tuple(members),
                subgraph=sub,
                label=label,
                completion_time=completion,
                tied=tied,
            )
        )
    return samples


def _boundaries(count: int, ratios: tuple[float, float, float]) -> tuple[int, int]:
    fracs = [Fraction(str(r)) for r in ratios]
    if sum(fracs) != 1:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    b1 = floor(count * fracs[0])
    b2 = floor(count * (fracs[0] + fracs[1]))
    return b1, b2


def chronological_split(
    samples: list[IopSample], ratios: tuple[float, float, float] = DEFAULT_RATIOS
) -> DatasetSplit:
    """Sort by completion time (stable) and cut at cumulative ratios.

    Boundary indices are floor(count * cumulative ratio) computed with
    exact arithmetic, so e.g. 7135 samples at 80/10/10 give 5708/713/714.
    """
    if len(samples) < 3:
        raise SplitError(f"need at least 3 samples to split, got {len(samples)}")
    b1, b2 = _boundaries(len(samples), ratios)
    ordered = sorted(samples, key=lambda s: s.completion_time)
    return DatasetSplit(train=ordered[:b1], validation=ordered[b1:b2], test=ordered[b2:])


def random_split(
    samples: list[IopSample],
    seed: int,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
) -> DatasetSplit:
    """Seeded uniform shuffle followed by the same cumulative-ratio cut."""
    if len(samples) < 3:
        raise SplitError(f"need at least 3 samples to split, got {len(samples)}")
    b1, b2 = _boundaries(len(samples), ratios)
    order = np.random.default_rng(seed).permutation(len(samples))
    shuffled = [samples[i] for i in order]
    return DatasetSplit(
        train=shuffled[:b1], validation=shuffled[b1:b2], test=shuffled[b2:]
    )


def sample_to_record(sample: IopSample) -> dict:
    """JSON-serialisable record used by the `extract` CLI output."""
    return {
        "clique": list(sample.clique),
        "label": label_to_str(sample.label),
        "completion_time": sample.completion_time,
        "tied": sample.tied,
        "events": [[e.u, e.v, e.t] for e in sample.subgraph.events],
    }


def sample_from_record(record: dict) -> IopSample:
    clique = tuple(record["clique"])
    sub = TemporalGraph.from_events(
        [(u, v, t) for u, v, t in record["events"]], extra_nodes=clique
    )
    return IopSample(
        clique=clique,
        subgraph=sub,
        label=label_from_str(record["label"], n=len(clique)),
        completion_time=record["completion_time"],
        tied=record["tied"],
    )


def write_samples(samples: list[IopSample], path) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(json.dumps(sample_to_record(s), sort_keys=True) + "\n")


def read_samples(path) -> list[IopSample]:
    with open(path) as fh:
        return [sample_from_record(json.loads(line)) for line in fh if line.strip()]
