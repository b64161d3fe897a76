import math
import random

import pytest

from amrseq.corpus import EmptyCorpus
from amrseq.graph import AmrGraph, Edge, Node, parse_penman
from amrseq.metrics import LengthMismatch, bleu, smatch, smatch_corpus

from helpers import random_graph


def rename_variables(graph: AmrGraph, prefix: str) -> AmrGraph:
    mapping = {v: f"{prefix}{i}" for i, v in enumerate(graph.variables())}
    nodes = tuple(
        Node(mapping.get(n.id, n.id), n.concept, n.sense, n.is_constant)
        for n in graph.nodes
    )
    edges = tuple(
        Edge(mapping.get(e.source, e.source), e.label, mapping.get(e.target, e.target), e.inverted)
        for e in graph.edges
    )
    return AmrGraph(nodes=nodes, edges=edges, root=mapping[graph.root])


class TestSmatch:
    def test_self_match_is_perfect(self):
        rng = random.Random(31)
        for _ in range(25):
            g = random_graph(rng, max_nodes=8)
            result = smatch(g, g)
            assert result.f1 == 1.0
            assert result.matched == result.gold_triples == result.pred_triples

    def test_disjoint_concepts_score_zero(self):
        g1 = parse_penman("(a / alpha :ARG0 (b / beta))")
        g2 = parse_penman("(c / gamma :ARG1 (d / delta))")
        assert smatch(g1, g2).f1 == 0.0

    def test_hand_example_two_thirds(self):
        gold = parse_penman("(w / want-01 :ARG0 (b / boy))")
        pred = parse_penman("(w2 / want-01 :ARG0 (g2 / girl))")
        result = smatch(gold, pred, exhaustive=True)
        assert result.matched == 2
        assert result.gold_triples == 3 and result.pred_triples == 3
        assert result.precision == pytest.approx(2 / 3)
        assert result.recall == pytest.approx(2 / 3)
        assert result.f1 == pytest.approx(2 / 3)

    def test_f1_symmetric_under_swap(self):
        rng = random.Random(37)
        for _ in range(20):
            g1 = random_graph(rng, max_nodes=6)
            g2 = random_graph(rng, max_nodes=6)
            ab = smatch(g1, g2, exhaustive=True)
            ba = smatch(g2, g1, exhaustive=True)
            assert ab.f1 == pytest.approx(ba.f1)
            assert ab.precision == pytest.approx(ba.recall)

    def test_invariant_under_variable_renaming(self):
        rng = random.Random(41)
        for _ in range(20):
            gold = random_graph(rng, max_nodes=6)
            pred = random_graph(rng, max_nodes=6)
            base = smatch(gold, pred, exhaustive=True)
            renamed = smatch(gold, rename_variables(pred, "zz"), exhaustive=True)
            assert base.matched == renamed.matched

    def test_hill_climbing_never_beats_oracle(self):
        rng = random.Random(43)
        for _ in range(100):
            gold = random_graph(rng, max_nodes=6)
            pred = random_graph(rng, max_nodes=6)
            climbed = smatch(gold, pred, restarts=4)
            oracle = smatch(gold, pred, exhaustive=True)
            assert climbed.matched <= oracle.matched

    def test_best_mapping_reported(self):
        gold = parse_penman("(w / want-01 :ARG0 (b / boy))")
        pred = parse_penman("(x / want-01 :ARG0 (y / boy))")
        result = smatch(gold, pred)
        assert result.best_mapping == {"w": "x", "b": "y"}

    def test_restarts_validated(self):
        g = parse_penman("(w / want-01)")
        with pytest.raises(ValueError):
            smatch(g, g, restarts=0)


class TestSmatchCorpus:
    def test_identical_corpus(self):
        graphs = [parse_penman("(w / want-01 :ARG0 (b / boy))")] * 3
        assert smatch_corpus(graphs, graphs).f1 == 1.0

    def test_micro_average_half(self):
        # One perfect pair plus one fully disjoint pair with equal triple
        # counts: micro precision = recall = 0.5.
        perfect = parse_penman("(a / alpha :ARG0 (b / beta))")
        gold2 = parse_penman("(c / gamma :ARG0 (d / delta))")
        pred2 = parse_penman("(e / epsilon :ARG1 (f / zeta))")
        result = smatch_corpus([perfect, gold2], [perfect, pred2], exhaustive=True)
        assert result.precision == pytest.approx(0.5)
        assert result.recall == pytest.approx(0.5)

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            smatch_corpus([], [])

    def test_length_mismatch(self):
        g = parse_penman("(w / want-01)")
        with pytest.raises(LengthMismatch):
            smatch_corpus([g], [g, g])


class TestBleu:
    def test_identical_is_hundred(self):
        refs = [["a", "b", "c", "d", "e"], ["x", "y", "z", "w", "v"]]
        result = bleu(refs, refs)
        assert result.score == 100.0
        assert result.brevity_penalty == 1.0

    def test_hand_computed_example(self):
        # hyp "a b c d" vs ref "a b c d e": all n-gram precisions 1,
        # BP = exp(1 - 5/4).
        result = bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d", "e"]])
        assert result.precisions == (1.0, 1.0, 1.0, 1.0)
        expected_bp = math.exp(1.0 - 5.0 / 4.0)
        assert result.brevity_penalty == pytest.approx(expected_bp, abs=1e-12)
        assert result.score == pytest.approx(expected_bp * 100.0, abs=1e-6)

    def test_no_fourgram_overlap_scores_zero(self):
        result = bleu([["a", "b", "c", "d", "e"]], [["a", "x", "c", "y", "e"]])
        assert result.score == 0.0

    def test_short_hypotheses_score_zero(self):
        # No 4-grams at all on the hypothesis side.
        assert bleu([["a", "b"]], [["a", "b"]]).score == 0.0

    def test_permutation_invariant(self):
        hyps = [["a", "b", "c", "d"], ["e", "f", "g", "h"], ["i", "j", "k", "l", "m"]]
        refs = [["a", "b", "c", "x"], ["e", "f", "g", "h"], ["i", "j", "k", "l"]]
        forward = bleu(hyps, refs)
        backward = bleu(hyps[::-1], refs[::-1])
        assert forward.score == pytest.approx(backward.score)
        assert forward.precisions == backward.precisions

    def test_clipping(self):
        # "the the the" against a single "the": unigram matches clip at 1.
        result = bleu([["the", "the", "the"]], [["the", "cat"]])
        assert result.precisions[0] == pytest.approx(1 / 3)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            bleu([["a"]], [])
        with pytest.raises(EmptyCorpus):
            bleu([], [])

    def test_line_format(self):
        result = bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d"]])
        assert result.line().startswith("BLEU = 100.00")
