"""SMATCH and corpus BLEU.

SMATCH scores two graphs by the best triple overlap over injective
variable mappings, searched by greedy hill climbing from several
initializations; an exhaustive mode serves as an oracle for small graphs.
BLEU follows the multi-bleu script semantics: corpus-level, case
sensitive, geometric mean of 1..4-gram precisions with a brevity penalty
and a hard zero when any precision is zero.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import EmptyCorpus
from .graph import AmrGraph


class LengthMismatch(ValueError):
    pass


@dataclass
class SmatchResult:
    precision: float
    recall: float
    f1: float
    matched: int
    gold_triples: int
    pred_triples: int
    best_mapping: dict[str, str] = field(default_factory=dict)

    def line(self) -> str:
        return f"Prec {self.precision:.3f} Rec {self.recall:.3f} F1 {self.f1:.3f}"


def _f1(matched: int, gold: int, pred: int) -> tuple[float, float, float]:
    precision = matched / pred if pred else 0.0
    recall = matched / gold if gold else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


class _MatchProblem:
    """Triple-overlap scoring for mappings from gold to pred variables."""

    def __init__(self, gold: AmrGraph, pred: AmrGraph):
        self.gold_vars = sorted(set(gold.variables()))
        self.pred_vars = sorted(set(pred.variables()))
        gold_triples = gold.triples()
        pred_triples = pred.triples()
        self.gold_count = len(gold_triples)
        self.pred_count = len(pred_triples)
        gvars = set(self.gold_vars)
        pvars = set(self.pred_vars)

        # Unary material per variable: the instance concept plus attribute
        # (relation, constant) pairs.
        def unary(triples, variables):
            out: dict[str, set] = {v: set() for v in variables}
            for s, r, o in triples:
                if s in variables and (o not in variables):
                    out[s].add((r, o))
            return out

        gold_unary = unary(gold_triples, gvars)
        pred_unary = unary(pred_triples, pvars)
        self.unary_gain: dict[str, dict[str, int]] = {}
        for gv in self.gold_vars:
            row = {}
            for pv in self.pred_vars:
                overlap = len(gold_unary[gv] & pred_unary[pv])
                if overlap:
                    row[pv] = overlap
            self.unary_gain[gv] = row

        self.gold_relations = [
            (s, r, o) for s, r, o in gold_triples if s in gvars and o in gvars
        ]
        self.pred_relations = {
            (s, r, o) for s, r, o in pred_triples if s in pvars and o in pvars
        }
        # Candidate pred variables per gold variable that share any unary
        # material, used to seed the search.
        self.concept_candidates = {
            gv: sorted(self.unary_gain[gv]) for gv in self.gold_vars
        }

    def score(self, mapping: dict[str, str | None]) -> int:
        total = 0
        for gv, pv in mapping.items():
            if pv is not None:
                total += self.unary_gain[gv].get(pv, 0)
        for s, r, o in self.gold_relations:
            ms, mo = mapping.get(s), mapping.get(o)
            if ms is not None and mo is not None and (ms, r, mo) in self.pred_relations:
                total += 1
        return total


def _reassign(mapping: dict[str, str | None], gv: str, pv: str | None) -> dict[str, str | None]:
    """Map gv to pv; a gold variable already holding pv takes gv's old
    image (swap), keeping the mapping injective."""
    trial = dict(mapping)
    if pv is not None:
        holder = next((g for g, p in trial.items() if p == pv and g != gv), None)
        if holder is not None:
            trial[holder] = trial[gv]
    trial[gv] = pv
    return trial


def _hill_climb(problem: _MatchProblem, start: dict[str, str | None]) -> tuple[int, dict]:
    mapping = dict(start)
    best = problem.score(mapping)
    pred_vars = problem.pred_vars
    while True:
        best_gain = 0
        best_move = None

        def consider(trial: dict[str, str | None]) -> None:
            nonlocal best_gain, best_move
            gain = problem.score(trial) - best
            if gain > best_gain:
                best_gain = gain
                best_move = trial

        for gv in problem.gold_vars:
            current = mapping[gv]
            for pv in [*pred_vars, None]:
                if pv != current:
                    consider(_reassign(mapping, gv, pv))
        # Relation triples only pay off when both endpoints move together,
        # so single-variable steps plateau; try aligning whole relation
        # pairs as one move.
        for s, r, o in problem.gold_relations:
            for s2, r2, o2 in problem.pred_relations:
                if r != r2:
                    continue
                if mapping.get(s) == s2 and mapping.get(o) == o2:
                    continue
                consider(_reassign(_reassign(mapping, s, s2), o, o2))
        if best_move is None:
            return best, mapping
        mapping = best_move
        best += best_gain


def _smart_start(problem: _MatchProblem, rng: random.Random) -> dict[str, str | None]:
    mapping: dict[str, str | None] = {}
    used: set[str] = set()
    for gv in problem.gold_vars:
        options = [pv for pv in problem.concept_candidates[gv] if pv not in used]
        if options:
            choice = rng.choice(options)
            mapping[gv] = choice
            used.add(choice)
        else:
            mapping[gv] = None
    return mapping


def _random_start(problem: _MatchProblem, rng: random.Random) -> dict[str, str | None]:
    pool = list(problem.pred_vars)
    rng.shuffle(pool)
    mapping: dict[str, str | None] = {}
    for gv in problem.gold_vars:
        mapping[gv] = pool.pop() if pool else None
    return mapping


def _exhaustive(problem: _MatchProblem) -> tuple[int, dict]:
    """Branch-and-bound over all injective (partial) variable mappings.

    Scores incrementally: each relation triple is charged when its
    later-assigned endpoint gets mapped, and an optimistic suffix bound
    prunes hopeless branches.
    """
    gold_vars = problem.gold_vars
    n = len(gold_vars)
    position = {gv: i for i, gv in enumerate(gold_vars)}
    relations_at = [[] for _ in range(n)]
    for s, r, o in problem.gold_relations:
        relations_at[max(position[s], position[o])].append((s, r, o))
    max_unary = [max(problem.unary_gain[gv].values(), default=0) for gv in gold_vars]
    suffix_bound = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_bound[i] = suffix_bound[i + 1] + max_unary[i] + len(relations_at[i])

    best_score = -1
    best_mapping: dict[str, str | None] = {}
    mapping: dict[str, str | None] = {}
    used: set[str] = set()

    def recur(i: int, score: int) -> None:
        nonlocal best_score, best_mapping
        if score + suffix_bound[i] <= best_score:
            return
        if i == n:
            best_score = score
            best_mapping = dict(mapping)
            return
        gv = gold_vars[i]
        promising = sorted(problem.unary_gain[gv], key=lambda pv: -problem.unary_gain[gv][pv])
        rest = [pv for pv in problem.pred_vars if pv not in problem.unary_gain[gv]]
        for pv in [*promising, *rest, None]:
            if pv is not None and pv in used:
                continue
            mapping[gv] = pv
            gain = problem.unary_gain[gv].get(pv, 0) if pv is not None else 0
            for s, r, o in relations_at[i]:
                ms, mo = mapping.get(s), mapping.get(o)
                if ms is not None and mo is not None and (ms, r, mo) in problem.pred_relations:
                    gain += 1
            if pv is not None:
                used.add(pv)
            recur(i + 1, score + gain)
            if pv is not None:
                used.discard(pv)
        del mapping[gv]

    recur(0, 0)
    return max(best_score, 0), best_mapping


def smatch(
    gold: AmrGraph,
    pred: AmrGraph,
    restarts: int = 4,
    seed: int = 0,
    exhaustive: bool = False,
) -> SmatchResult:
    """Score ``pred`` against ``gold``.

    Hill climbing runs from one concept-seeded start plus ``restarts - 1``
    random starts (fixed seed, reproducible). ``exhaustive=True`` searches
    every injective mapping instead; intended as an oracle for graphs with
    few variables.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    problem = _MatchProblem(gold, pred)
    if exhaustive:
        matched, mapping = _exhaustive(problem)
    else:
        rng = random.Random(seed)
        matched = -1
        mapping = {}
        for attempt in range(restarts):
            start = _smart_start(problem, rng) if attempt == 0 else _random_start(problem, rng)
            score, candidate = _hill_climb(problem, start)
            if score > matched:
                matched = score
                mapping = candidate
    matched = max(matched, 0)
    precision, recall, f1 = _f1(matched, problem.gold_count, problem.pred_count)
    return SmatchResult(
        precision=precision,
        recall=recall,
        f1=f1,
        matched=matched,
        gold_triples=problem.gold_count,
        pred_triples=problem.pred_count,
        best_mapping={g: p for g, p in mapping.items() if p is not None},
    )


def smatch_corpus(
    golds: Sequence[AmrGraph],
    preds: Sequence[AmrGraph],
    restarts: int = 4,
    seed: int = 0,
    exhaustive: bool = False,
) -> SmatchResult:
    """Micro-averaged corpus SMATCH: matched/gold/pred counts are summed
    over examples before computing precision and recall."""
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} gold graphs vs {len(preds)} predictions")
    if not golds:
        raise EmptyCorpus("no graph pairs to score")
    matched = gold_total = pred_total = 0
    for g, p in zip(golds, preds):
        r = smatch(g, p, restarts=restarts, seed=seed, exhaustive=exhaustive)
        matched += r.matched
        gold_total += r.gold_triples
        pred_total += r.pred_triples
    precision, recall, f1 = _f1(matched, gold_total, pred_total)
    return SmatchResult(
        precision=precision,
        recall=recall,
        f1=f1,
        matched=matched,
        gold_triples=gold_total,
        pred_triples=pred_total,
    )


@dataclass
class BleuResult:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int

    def line(self) -> str:
        p = "/".join(f"{x * 100:.1f}" for x in self.precisions)
        return (
            f"BLEU = {self.score:.2f}, {p} "
            f"(BP={self.brevity_penalty:.3f}, hyp_len={self.hyp_length}, "
            f"ref_len={self.ref_length})"
        )


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> BleuResult:
    """Corpus BLEU-4 over pre-tokenized text, one reference per
    hypothesis. Zero when any n-gram precision is zero (multi-bleu
    behavior); no smoothing."""
    if len(hypotheses) != len(references):
        raise LengthMismatch(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise EmptyCorpus("no sentence pairs to score")
    max_n = 4
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            hyp_ngrams = _ngrams(hyp, n)
            if not hyp_ngrams:
                continue
            ref_ngrams = _ngrams(ref, n)
            totals[n - 1] += sum(hyp_ngrams.values())
            matches[n - 1] += sum(
                min(count, ref_ngrams.get(ngram, 0)) for ngram, count in hyp_ngrams.items()
            )
    precisions = tuple(
        matches[i] / totals[i] if totals[i] else 0.0 for i in range(max_n)
    )
    if hyp_len == 0:
        brevity_penalty = 0.0
    elif hyp_len < ref_len:
        brevity_penalty = math.exp(1.0 - ref_len / hyp_len)
    else:
        brevity_penalty = 1.0
    if any(p == 0.0 for p in precisions):
        score = 0.0
    else:
        score = brevity_penalty * math.exp(sum(math.log(p) for p in precisions) / max_n) * 100.0
    return BleuResult(
        score=score,
        precisions=precisions,  # type: ignore[arg-type]
        brevity_penalty=brevity_penalty,
        hyp_length=hyp_len,
        ref_length=ref_len,
    )
