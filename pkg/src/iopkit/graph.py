"""Timestamped undirected interaction graphs.

The on-disk format is one event per line, ``src dst timestamp``,
whitespace separated. Lines starting with ``#`` and blank lines are
skipped; extra trailing fields are ignored. Self-loops are dropped (and
counted); duplicate events of the same pair, including at the same
timestamp, are kept. Timestamps are stored as 64-bit integers (the
datasets this targets use epoch seconds); real-valued timestamps are
accepted only when integral.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ConfigError, EmptyGraphError, ParseError

log = logging.getLogger(__name__)

Pair = tuple[int, int]


class EdgeEvent(NamedTuple):
    u: int
    v: int
    t: int


def canonical_pair(u: int, v: int) -> Pair:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class TemporalGraph:
    """Immutable store of nodes and timestamped undirected events.

    ``events`` is sorted by timestamp (stable with respect to insertion
    order for ties). ``per_pair_times`` maps each canonical pair to its
    ascending timestamp list; its key set equals ``static_edges``.
    """

    nodes: frozenset[int]
    events: tuple[EdgeEvent, ...]
    static_edges: frozenset[Pair]
    per_pair_times: dict[Pair, tuple[int, ...]]
    self_loops_dropped: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.static_edges)

    @property
    def num_events(self) -> int:
        return len(self.events)

    @property
    def t_min(self) -> int | None:
        return self.events[0].t if self.events else None

    @property
    def t_max(self) -> int | None:
        return self.events[-1].t if self.events else None

    @staticmethod
    def from_events(
        events: Iterable[tuple[int, int, int]],
        extra_nodes: Iterable[int] = (),
        self_loops_dropped: int = 0,
    ) -> "TemporalGraph":
        """Build a graph from (u, v, t) triples.

        Endpoints are canonicalised to u < v and events sorted by
        timestamp (stable). Self-loops must already have been removed.
        """
        canon = [EdgeEvent(*canonical_pair(u, v), t) for u, v, t in events]
        canon.sort(key=lambda e: e.t)
        per_pair: dict[Pair, list[int]] = {}
        nodes: set[int] = set(extra_nodes)
        for e in canon:
            per_pair.setdefault((e.u, e.v), []).append(e.t)
            nodes.add(e.u)
            nodes.add(e.v)
        return TemporalGraph(
            nodes=frozenset(nodes),
            events=tuple(canon),
            static_edges=frozenset(per_pair),
            per_pair_times={p: tuple(ts) for p, ts in per_pair.items()},
            self_loops_dropped=self_loops_dropped,
        )


def _parse_number(text: str, line_no: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line_no, f"non-numeric {what}: {text!r}") from None
    if not value.is_integer():
        raise ParseError(
            line_no,
            f"non-integral {what}: {text!r} (pre-scale fractional timestamps to integers)",
        )
    return int(value)


def parse_edge_list(text: str | Iterable[str]) -> TemporalGraph:
    """Parse an edge-list stream into a TemporalGraph.

    Raises ParseError on malformed lines (with the 1-based line number)
    and EmptyGraphError when no events survive parsing.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    events: list[tuple[int, int, int]] = []
    dropped = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 3:
            raise ParseError(line_no, f"expected at least 3 fields, got {len(fields)}")
        u = _parse_number(fields[0], line_no, "source node id")
        v = _parse_number(fields[1], line_no, "destination node id")
        t = _parse_number(fields[2], line_no, "timestamp")
        if u < 0 or v < 0:
            raise ParseError(line_no, "negative node id")
        if u == v:
            dropped += 1
            continue
        events.append((u, v, t))
    if not events:
        raise EmptyGraphError("no interaction events found in input")
    if dropped:
        log.warning("dropped %d self-loop event(s)", dropped)
    return TemporalGraph.from_events(events, self_loops_dropped=dropped)


def serialize_edge_list(g: TemporalGraph) -> str:
    """Render the graph back to edge-list text (canonical event order)."""
    return "".join(f"{e.u} {e.v} {e.t}\n" for e in g.events)


def first_interaction_times(g: TemporalGraph) -> dict[Pair, int]:
    """Earliest timestamp per static edge; repeat interactions ignored."""
    return {pair: times[0] for pair, times in g.per_pair_times.items()}


def static_projection(g: TemporalGraph) -> dict[int, set[int]]:
    """Undirected simple-graph adjacency over pairs with >= 1 event.

    Every node of the graph appears as a key, isolated ones with an
    empty neighbour set.
    """
    adj: dict[int, set[int]] = {v: set() for v in g.nodes}
    for u, v in g.static_edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def synth_generate(
    num_nodes: int,
    num_cliques: int,
    n: int,
    noise_edges: int,
    seed: int,
) -> TemporalGraph:
    """Plant disjoint n-cliques with a deterministic interaction order.

    Clique c occupies nodes [c*n, (c+1)*n). Its edges first interact in
    ascending lexicographic order with globally increasing timestamps,
    so every planted clique's order label is the identity permutation
    and later cliques complete later. Noise events are drawn uniformly
    over pairs outside the planted cliques; heavy noise may create
    incidental cliques but never disturbs a planted label.
    """
    if n < 2 or num_cliques < 0 or noise_edges < 0:
        raise ConfigError("clique size must be >= 2 and counts non-negative")
    if num_nodes < n * num_cliques:
        raise ConfigError(
            f"{num_cliques} cliques of size {n} need {n * num_cliques} nodes, got {num_nodes}"
        )
    events: list[tuple[int, int, int]] = []
    t = 0
    for c in range(num_cliques):
        base = c * n
        members = range(base, base + n)
        for i in members:
            for j in members:
                if i < j:
                    events.append((i, j, t))
                    t += 1
    if noise_edges:
        if num_nodes < 2:
            raise ConfigError("noise edges need at least 2 nodes")
        rng = np.random.default_rng(seed)
        block = {v: v // n for v in range(n * num_cliques)}
        horizon = max(2 * (t + noise_edges), 1)
        placed = 0
        attempts = 0
        while placed < noise_edges:
            attempts += 1
            if attempts > 1000 * noise_edges + 1000:
                raise ConfigError("no room for noise edges outside planted cliques")
            u, v = (int(x) for x in rng.integers(0, num_nodes, size=2))
            if u == v:
                continue
            if u in block and v in block and block[u] == block[v]:
                continue
            events.append((*canonical_pair(u, v), int(rng.integers(0, horizon))))
            placed += 1
    return TemporalGraph.from_events(events, extra_nodes=range(num_nodes))
