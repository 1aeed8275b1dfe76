"""Sequence evaluation metrics for interaction-order predictions.

Five scores per sample: exact-match accuracy, BLEU-3 (no brevity
penalty, 1-gram precision retained so non-permutation predictions still
score), METEOR with exact-match alignment, recall-weighted harmonic
mean F = 10PR/(R+9P) and cubic fragmentation penalty, and the Kendall
and Spearman rank correlations. The correlations compare token ranks
(position in the target vs position in the prediction) and are only
defined when the prediction is a permutation of the target; by default
such samples are skipped and counted, optionally a pad-rank fallback
assigns missing tokens trailing ranks. p-values are never computed.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Hashable, Sequence

from .errors import DataError, MetricUndefinedError

METRIC_NAMES = ("accuracy", "bleu3", "meteor", "kendall_tau", "spearman_rho")


def accuracy(pred: Sequence[Hashable], target: Sequence[Hashable]) -> int:
    """1 iff the sequences are identical, else 0."""
    if len(pred) != len(target):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(target)}")
    return int(list(pred) == list(target))


def _ngrams(seq: Sequence[Hashable], k: int) -> Counter:
    return Counter(tuple(seq[i : i + k]) for i in range(len(seq) - k + 1))


def bleu3(pred: Sequence[Hashable], target: Sequence[Hashable]) -> float:
    """Geometric mean of clipped 1/2/3-gram precisions, no brevity penalty.

    Any zero precision makes the score 0 (no smoothing).
    """
    if len(pred) != len(target):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(target)}")
    if len(pred) < 3:
        raise ValueError(f"BLEU-3 needs sequences of length >= 3, got {len(pred)}")
    score = 1.0
    for k in (1, 2, 3):
        pred_counts = _ngrams(pred, k)
        target_counts = _ngrams(target, k)
        clipped = sum(min(c, target_counts[g]) for g, c in pred_counts.items())
        total = sum(pred_counts.values())
        if clipped == 0:
            return 0.0
        score *= (clipped / total) ** (1.0 / 3.0)
    return score


def _min_chunks(pred: Sequence[Hashable], target: Sequence[Hashable]) -> tuple[int, int]:
    """(matches, minimal chunk count) over exact-match unigram alignments.

    A chunk is a maximal run of matched prediction positions mapping to
    contiguous, in-order target positions. The minimum is exact via
    enumeration of alignments; fine for the short sequences used here,
    exponential in general.
    """
    pred_occ: dict[Hashable, list[int]] = {}
    for i, tok in enumerate(pred):
        pred_occ.setdefault(tok, []).append(i)
    target_occ: dict[Hashable, list[int]] = {}
    for i, tok in enumerate(target):
        target_occ.setdefault(tok, []).append(i)
    matched = {
        tok: min(len(pos), len(target_occ.get(tok, ())))
        for tok, pos in pred_occ.items()
        if tok in target_occ
    }
    matches = sum(matched.values())
    if matches == 0:
        return 0, 0

    tokens = sorted(matched, key=lambda tok: repr(tok))

    def alignments(idx: int, mapping: dict[int, int]):
        if idx == len(tokens):
            yield mapping
            return
        tok = tokens[idx]
        c = matched[tok]
        for p_sel in combinations(pred_occ[tok], c):
            for t_sel in permutations(target_occ[tok], c):
                nxt = dict(mapping)
                nxt.update(zip(p_sel, t_sel))
                yield from alignments(idx + 1, nxt)

    best = matches
    for mapping in alignments(0, {}):
        positions = sorted(mapping)
        chunks = 1
        for a, b in zip(positions, positions[1:]):
            if b != a + 1 or mapping[b] != mapping[a] + 1:
                chunks += 1
        best = min(best, chunks)
    return matches, best


def meteor(pred: Sequence[Hashable], target: Sequence[Hashable]) -> float:
    """Exact-match METEOR: F = 10PR/(R+9P), penalty 0.5*(chunks/matches)^3."""
    if not pred or not target:
        raise ValueError("METEOR needs non-empty sequences")
    matches, chunks = _min_chunks(pred, target)
    if matches == 0:
        return 0.0
    precision = matches / len(pred)
    recall = matches / len(target)
    f_score = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_score * (1.0 - penalty)


def _rank_vectors(
    pred: Sequence[Hashable], target: Sequence[Hashable]
) -> tuple[list[int], list[int]]:
    if len(set(target)) != len(target):
        raise MetricUndefinedError("target tokens must be distinct for rank metrics")
    if Counter(pred) != Counter(target):
        raise MetricUndefinedError("prediction is not a permutation of the target")
    pred_pos = {tok: i for i, tok in enumerate(pred)}
    target_ranks = list(range(len(target)))
    pred_ranks = [pred_pos[tok] for tok in target]
    return target_ranks, pred_ranks


def _pad_rank_vectors(
    pred: Sequence[Hashable], target: Sequence[Hashable]
) -> tuple[list[int], list[int]]:
    """Fallback ranks for non-permutation predictions.

    A target token's prediction rank is its first occurrence position;
    missing tokens are appended past the end in target order.
    """
    if len(set(target)) != len(target):
        raise MetricUndefinedError("target tokens must be distinct for rank metrics")
    first_pos: dict[Hashable, int] = {}
    for i, tok in enumerate(pred):
        first_pos.setdefault(tok, i)
    pred_ranks = []
    overflow = len(pred)
    for tok in target:
        if tok in first_pos:
            pred_ranks.append(first_pos[tok])
        else:
            pred_ranks.append(overflow)
            overflow += 1
    return list(range(len(target))), pred_ranks


def kendall_tau(
    pred: Sequence[Hashable], target: Sequence[Hashable], pad_rank: bool = False
) -> float:
    """(concordant - discordant) / C(m, 2) over token-rank pairs."""
    ranker = _pad_rank_vectors if pad_rank else _rank_vectors
    x, y = ranker(pred, target)
    m = len(x)
    if m < 2:
        raise MetricUndefinedError("rank correlation needs at least 2 tokens")
    concordant = discordant = 0
    for i, j in combinations(range(m), 2):
        s = (x[i] - x[j]) * (y[i] - y[j])
        if s > 0:
            concordant += 1
        elif s < 0:
            discordant += 1
    return (concordant - discordant) / (m * (m - 1) / 2)


def spearman_rho(
    pred: Sequence[Hashable], target: Sequence[Hashable], pad_rank: bool = False
) -> float:
    """Pearson correlation between the two token-rank vectors."""
    ranker = _pad_rank_vectors if pad_rank else _rank_vectors
    x, y = ranker(pred, target)
    m = len(x)
    if m < 2:
        raise MetricUndefinedError("rank correlation needs at least 2 tokens")
    mx = sum(x) / m
    my = sum(y) / m
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    if vx == 0 or vy == 0:
        raise MetricUndefinedError("constant rank vector")
    return cov / (vx * vy) ** 0.5


@dataclass
class SampleMetrics:
    """Per-sample values; None marks a metric skipped as undefined."""

    accuracy: float
    bleu3: float | None
    meteor: float | None
    kendall_tau: float | None
    spearman_rho: float | None

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass
class MetricReport:
    samples: list[SampleMetrics]
    aggregate: dict[str, float | None]
    skipped: dict[str, int]
    count: int

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "aggregate": self.aggregate,
            "skipped": self.skipped,
            "samples": [s.as_dict() for s in self.samples],
        }


def evaluate_sequences(
    pred: Sequence[Hashable], target: Sequence[Hashable], pad_rank: bool = False
) -> SampleMetrics:
    """Score one prediction against its target on all five metrics.

    BLEU-3 is skipped for sequences shorter than 3 tokens; the rank
    correlations are skipped for non-permutation predictions unless
    pad_rank is set.
    """
    acc = float(accuracy(pred, target))
    bleu = bleu3(pred, target) if len(pred) >= 3 else None
    met = meteor(pred, target)
    try:
        tau = kendall_tau(pred, target, pad_rank=pad_rank)
        rho = spearman_rho(pred, target, pad_rank=pad_rank)
    except MetricUndefinedError:
        tau = None
        rho = None
    return SampleMetrics(acc, bleu, met, tau, rho)


def aggregate(records: list[SampleMetrics]) -> MetricReport:
    """Arithmetic means over defined values, with skip counts."""
    if not records:
        raise DataError("cannot aggregate an empty set of metric records")
    agg: dict[str, float | None] = {}
    skipped: dict[str, int] = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in records if getattr(r, name) is not None]
        skipped[name] = len(records) - len(values)
        agg[name] = sum(values) / len(values) if values else None
    return MetricReport(samples=records, aggregate=agg, skipped=skipped, count=len(records))


def report_to_json(report: MetricReport) -> str:
    return json.dumps(report.as_dict(), sort_keys=True, indent=2)


def report_to_csv(report: MetricReport) -> str:
    """One row per sample plus a final aggregate row."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(("sample",) + tuple(METRIC_NAMES))

    def fmt(v):
        return "" if v is None else repr(v)

    for i, s in enumerate(report.samples):
        writer.writerow([i] + [fmt(getattr(s, name)) for name in METRIC_NAMES])
    writer.writerow(["aggregate"] + [fmt(report.aggregate[name]) for name in METRIC_NAMES])
    return buf.getvalue()
