"""Vocabulary statistics, external-corpus sampling, and edge-order analysis.

Supports the dataset-side work around training: building token
vocabularies, out-of-vocabulary rates at a count threshold, single-pass
reservoir sampling of an external sentence stream filtered to the corpus
vocabulary, and the relative-order consistency analysis of edge pairs that
share a parent.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .graph import AmrGraph
from .preprocess import AlignmentSet, AnonymizationRecord


class EmptyCorpus(ValueError):
    pass


@dataclass
class Vocabulary:
    """Token -> occurrence counts over one side of a corpus."""

    side: str = "nl"  # "nl" or "amr"
    counts: Counter = field(default_factory=Counter)
    built_from: str = ""

    def __contains__(self, token: str) -> bool:
        return token in self.counts

    def count(self, token: str) -> int:
        return self.counts.get(token, 0)

    @property
    def types(self) -> int:
        return len(self.counts)

    @property
    def total_tokens(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: "Vocabulary") -> None:
        self.counts.update(other.counts)


def _as_tokens(line) -> list[str]:
    return line.split() if isinstance(line, str) else list(line)


def build_vocabulary(lines: Iterable, side: str = "nl", built_from: str = "") -> Vocabulary:
    """Count tokens over sentences or linearized graphs; lines may be
    strings or token lists."""
    counts: Counter = Counter()
    seen_any = False
    for line in lines:
        seen_any = True
        counts.update(_as_tokens(line))
    if not seen_any:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    return Vocabulary(side=side, counts=counts, built_from=built_from)


def oov_rate(train_vocab: Vocabulary, heldout: Iterable, threshold: int) -> float:
    """Percentage of held-out token types whose training count is below
    ``threshold``. Unrounded; round only for display."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    types: set[str] = set()
    for line in heldout:
        types.update(_as_tokens(line))
    if not types:
        raise EmptyCorpus("held-out corpus has no tokens")
    below = sum(1 for t in types if train_vocab.count(t) < threshold)
    return 100.0 * below / len(types)


@dataclass
class Example:
    id: str
    sentence: list[str]
    graph: AmrGraph

    @property
    def sentence_string(self) -> str:
        return " ".join(self.sentence)


@dataclass
class SplitSet:
    """Train/dev/test examples; ids unique, sentences disjoint across
    splits."""

    train: list[Example] = field(default_factory=list)
    dev: list[Example] = field(default_factory=list)
    test: list[Example] = field(default_factory=list)

    def __post_init__(self):
        ids = [e.id for split in (self.train, self.dev, self.test) for e in split]
        if len(ids) != len(set(ids)):
            raise ValueError("example ids must be unique across splits")
        seen: dict[str, str] = {}
        for name, split in (("train", self.train), ("dev", self.dev), ("test", self.test)):
            for e in split:
                key = e.sentence_string
                if key in seen and seen[key] != name:
                    raise ValueError(f"sentence appears in both {seen[key]} and {name}: {key!r}")
                seen[key] = name

    def all_sentence_strings(self) -> set[str]:
        return {
            e.sentence_string
            for split in (self.train, self.dev, self.test)
            for e in split
        }


@dataclass
class SampleResult:
    """Output of :func:`sample_external`; ``insufficient`` flags a partial
    result (fewer eligible candidates than requested)."""

    sentences: list[str]
    requested: int
    candidates_seen: int

    @property
    def insufficient(self) -> bool:
        return len(self.sentences) < self.requested


def sample_external(
    stream: Iterable[str],
    vocab: Vocabulary,
    exclude: Iterable[str] = (),
    target_size: int = 0,
    seed: int = 0,
) -> SampleResult:
    """Reservoir-sample sentences whose tokens all appear in ``vocab``.

    Sentences matching (after whitespace normalization) anything in
    ``exclude`` or an earlier candidate are skipped, so the output is
    duplicate free and disjoint from the given corpora. Single pass;
    deterministic for a fixed seed regardless of stream chunking.
    """
    if target_size < 0:
        raise ValueError("target_size must be >= 0")
    excluded = {" ".join(s.split()) for s in exclude}
    seen: set[str] = set()
    reservoir: list[str] = []
    rng = random.Random(seed)
    candidates = 0
    for line in stream:
        key = " ".join(line.split())
        if not key:
            continue
        if key in excluded or key in seen:
            continue
        if any(token not in vocab for token in key.split()):
            continue
        seen.add(key)
        if target_size > 0:
            if len(reservoir) < target_size:
                reservoir.append(key)
            else:
                j = rng.randint(0, candidates)
                if j < target_size:
                    reservoir[j] = key
        candidates += 1
    return SampleResult(sentences=reservoir, requested=target_size, candidates_seen=candidates)


@dataclass
class EdgeOrderStats:
    """Relative-order counts for unordered edge-label pairs under a shared
    parent, plus realization agreement when alignments are available.

    ``pair_counts[(a, b)]`` with a < b holds [times a came first, times b
    came first]. A pair is consistent when one of the two counts is zero.
    """

    pair_counts: dict[tuple[str, str], list[int]] = field(default_factory=dict)
    realization_agree: int = 0
    realization_total: int = 0

    def observe(self, first_label: str, second_label: str) -> None:
        a, b = sorted((first_label, second_label))
        counts = self.pair_counts.setdefault((a, b), [0, 0])
        counts[0 if first_label == a else 1] += 1

    def observations(self, pair: tuple[str, str]) -> int:
        return sum(self.pair_counts.get(pair, [0, 0]))

    def is_consistent(self, pair: tuple[str, str]) -> bool:
        counts = self.pair_counts.get(pair, [0, 0])
        return min(counts) == 0

    def eligible_pairs(self, min_observations: int = 2) -> list[tuple[str, str]]:
        return [p for p in self.pair_counts if self.observations(p) >= min_observations]

    def consistency_fraction(self, min_observations: int = 2) -> float:
        """Percent of pairs (seen at least ``min_observations`` times) that
        always occurred in one relative order."""
        eligible = self.eligible_pairs(min_observations)
        if not eligible:
            return 100.0
        consistent = sum(1 for p in eligible if self.is_consistent(p))
        return 100.0 * consistent / len(eligible)

    def realization_agreement(self) -> float | None:
        """Percent of variable-pair observations whose graph order matches
        the aligned realization order; None without alignment data."""
        if self.realization_total == 0:
            return None
        return 100.0 * self.realization_agree / self.realization_total

    def to_json(self) -> str:
        pairs = {
            f"{a}|{b}": counts for (a, b), counts in sorted(self.pair_counts.items())
        }
        return json.dumps(
            {
                "pairs": pairs,
                "consistency_fraction": self.consistency_fraction(),
                "realization_agreement": self.realization_agreement(),
            },
            indent=2,
            sort_keys=True,
        )


def _child_span_starts(
    graph: AmrGraph, alignments: AlignmentSet | None, example_id: str
) -> dict[str, int]:
    if alignments is None:
        return {}
    return {a.path: a.start for a in alignments.for_example(example_id)}


def edge_order_stats(
    graphs: Sequence[AmrGraph],
    alignments: AlignmentSet | None = None,
    ids: Sequence[str] | None = None,
) -> EdgeOrderStats:
    """Compare the relative order of edge-label pairs under each parent.

    With alignments (keyed by example id, paths are dotted child indices
    of the written tree), observations of pairs that vary in order are
    additionally checked against the order of the aligned spans.
    """
    if ids is None:
        ids = [str(i) for i in range(len(graphs))]
    stats = EdgeOrderStats()
    observations: list[tuple[tuple[str, str], int | None, int | None]] = []

    for graph, example_id in zip(graphs, ids):
        spans = _child_span_starts(graph, alignments, example_id)
        stack: list[tuple[str, str]] = [(graph.root, "")]
        seen = {graph.root}
        while stack:
            node_id, path = stack.pop()
            edges = graph.written_children(node_id)
            kids = []
            for i, edge in enumerate(edges):
                child_path = f"{path}.{i}" if path else str(i)
                kids.append((edge.written_label, child_path))
                target = edge.written_target
                if target not in seen:
                    seen.add(target)
                    stack.append((target, child_path))
            for i in range(len(kids)):
                for j in range(i + 1, len(kids)):
                    la, pa = kids[i]
                    lb, pb = kids[j]
                    if la == lb:
                        continue
                    stats.observe(la, lb)
                    key = (la, lb) if la < lb else (lb, la)
                    observations.append((key, spans.get(pa), spans.get(pb)))

    for key, start_first, start_second in observations:
        if stats.is_consistent(key):
            continue
        if start_first is None or start_second is None or start_first == start_second:
            continue
        stats.realization_total += 1
        if start_first < start_second:
            stats.realization_agree += 1
    return stats


def open_class_stats(
    sentences: Sequence[Sequence[str]],
    per_example_records: Sequence[Sequence[AnonymizationRecord]],
    rare_threshold: int = 5,
) -> dict:
    """Corpus counters for anonymized open-class material: share of
    sentence tokens, share of vocabulary types, and how many of those
    types are rare (count below the threshold)."""
    total_tokens = 0
    open_tokens = 0
    counts: Counter = Counter()
    open_types: set[str] = set()
    for sentence, records in zip(sentences, per_example_records):
        total_tokens += len(sentence)
        counts.update(sentence)
        for rec in records:
            words = rec.surface.split()
            open_tokens += len(words)
            open_types.update(words)
    if total_tokens == 0:
        raise EmptyCorpus("no sentence tokens")
    rare = sum(1 for t in open_types if counts[t] < rare_threshold)
    return {
        "token_fraction": 100.0 * open_tokens / total_tokens,
        "vocabulary_fraction": 100.0 * len(open_types) / max(1, len(counts)),
        "rare_fraction": 100.0 * rare / len(open_types) if open_types else 0.0,
    }
