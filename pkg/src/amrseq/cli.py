"""Command-line surface: one thin subcommand per pipeline stage.

Exit codes: 0 success, 1 usage, 2 data error (named file/position where
known), 3 model or protocol error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import corpus as corpus_ops
from . import graph as graph_ops
from . import harness as harness_ops
from . import linearize as linearize_ops
from . import metrics as metrics_ops
from . import preprocess as preprocess_ops

USAGE_ERROR = 1
DATA_ERROR = 2
MODEL_ERROR = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


@dataclass
class PipelineConfig:
    """Preprocessing switches mirroring the ablation matrix: full pipeline,
    minus scope markers, minus entity clusters, minus anonymization.
    Disabling anonymization forces clustering off."""

    mode: str = "generation"
    scope_markers: bool = True
    ne_clusters: bool = True
    anonymization: bool = True
    order: str = "human"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in preprocess_ops.MODES:
            raise ValueError(f"mode must be one of {preprocess_ops.MODES}")
        if self.order not in ("human", "global-random", "random"):
            raise ValueError("order must be human, global-random or random")
        if not self.anonymization:
            self.ne_clusters = False

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as f:
            return cls(**json.load(f))


def _example_id(graph: graph_ops.AmrGraph, index: int) -> str:
    for line in graph.metadata:
        if line.startswith("# ::id"):
            parts = line.split()
            if len(parts) >= 3:
                return parts[2]
    return str(index)


def _make_order(config: PipelineConfig, trees) -> linearize_ops.LinearizationOrder:
    if config.order == "human":
        return linearize_ops.HumanOrder()
    if config.order == "random":
        return linearize_ops.RandomOrder(seed=config.seed)
    labels: set[str] = set()
    for tree in trees:
        labels.update(tree.edge_labels())
    return linearize_ops.make_global_order(labels, config.seed)


def _read_token_lines(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=preprocess_ops.MODES, default="generation")
    p.add_argument("--order", choices=("human", "global-random", "random"), default="human")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-scope", action="store_true", help="drop scope markers")
    p.add_argument("--no-ne-clusters", action="store_true", help="keep fine entity types")
    p.add_argument("--no-anon", action="store_true", help="skip anonymization entirely")
    p.add_argument("--config", help="JSON PipelineConfig; flags override its fields")


def _pipeline_config(args) -> PipelineConfig:
    if args.config:
        config = PipelineConfig.from_json_file(args.config)
        if args.mode != "generation":
            config.mode = args.mode
        if args.order != "human":
            config.order = args.order
        if args.seed:
            config.seed = args.seed
    else:
        config = PipelineConfig(mode=args.mode, order=args.order, seed=args.seed)
    if args.no_scope:
        config.scope_markers = False
    if args.no_ne_clusters:
        config.ne_clusters = False
    if args.no_anon:
        config.anonymization = False
        config.ne_clusters = False
    return config


def build_parser() -> _Parser:
    parser = _Parser(prog="amrseq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="simplify/anonymize graphs and sentences")
    p.add_argument("--amr", help="Penman file, graphs separated by blank lines")
    p.add_argument("--sentences", help="one tokenized sentence per line")
    p.add_argument("--alignments", help="JSONL alignments (id, path, start, end)")
    p.add_argument(
        "--ner-spans",
        help="JSONL NER spans (id, spans:[{start,end,type}]); normalizes "
        "sentences for parsing instead of using graph alignments",
    )
    p.add_argument("--registry", help="fine->coarse entity type TSV")
    p.add_argument("--out-graphs", help="linearized graph sequences out")
    p.add_argument("--out-sentences", help="anonymized sentences out")
    p.add_argument("--out-records", help="anonymization records JSONL out")
    p.add_argument("--table", help="existing anonymization table JSON to load")
    p.add_argument("--save-table", help="write the table observed on this corpus")
    _add_pipeline_flags(p)

    p = sub.add_parser("linearize", help="AMR file to token sequences")
    p.add_argument("--amr", required=True)
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)

    p = sub.add_parser("delinearize", help="token sequences back to Penman AMR")
    p.add_argument("--seq", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="JSONL repair report out")

    p = sub.add_parser("deanonymize", help="restore surface text in generated output")
    p.add_argument("--tokens", required=True, help="generated token lines")
    p.add_argument("--records", required=True, help="records JSONL from preprocess")
    p.add_argument("--table", required=True, help="anonymization table JSON")
    p.add_argument("--out", required=True)

    p = sub.add_parser("stats", help="corpus statistics reports")
    stats_sub = p.add_subparsers(dest="stats_command", required=True)
    v = stats_sub.add_parser("vocab", help="vocabulary size and counts")
    v.add_argument("--input", required=True)
    v.add_argument("--json", action="store_true")
    o = stats_sub.add_parser("oov", help="out-of-vocabulary table")
    o.add_argument("--train", required=True)
    o.add_argument("--heldout", required=True, nargs="+")
    o.add_argument("--thresholds", default="1,5")
    o.add_argument("--json", action="store_true")
    e = stats_sub.add_parser("edge-order", help="edge pair ordering consistency")
    e.add_argument("--amr", required=True)
    e.add_argument("--alignments")
    e.add_argument("--json", action="store_true")

    p = sub.add_parser("sample", help="vocabulary-filtered reservoir sample")
    p.add_argument("--stream", required=True, help="sentence file, or - for stdin")
    p.add_argument("--vocab-from", required=True, help="corpus whose tokens are allowed")
    p.add_argument("--exclude", nargs="*", default=[], help="files of sentences to exclude")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("smatch", help="score predicted AMR against gold")
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("bleu", help="corpus BLEU of hypotheses against references")
    p.add_argument("hyp")
    p.add_argument("ref")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("train", help="run the paired training procedure")
    p.add_argument("--data", required=True, help="dir with {train,dev[,test]}.{amr,snt}")
    p.add_argument("--external", required=True, help="external sentence file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--mock", choices=harness_ops.MockModel.BEHAVIORS)
    group.add_argument("--model-cmd", help="endpoint command (shell-split)")
    p.add_argument("--k", type=int, default=200_000)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--epochs-initial", type=int, default=60)
    p.add_argument("--epochs-pretrain", type=int, default=20)
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parser-metric", choices=sorted(harness_ops.METRICS), default="smatch")
    p.add_argument("--generator-metric", choices=sorted(harness_ops.METRICS), default="bleu")
    p.add_argument("--no-fine-tune", action="store_true")
    p.add_argument("--work-dir", default="amrseq-jobs")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--ledger", help="write the run ledger JSON here")
    return parser


# --- command bodies ----------------------------------------------------------

def _cmd_preprocess(args) -> int:
    config = _pipeline_config(args)
    if not args.amr and not args.ner_spans:
        raise ValueError("preprocess needs --amr, or --ner-spans with --sentences")
    registry = (
        preprocess_ops.EntityTypeRegistry.from_tsv(args.registry)
        if args.registry
        else preprocess_ops.EntityTypeRegistry.default()
    )
    sentences = _read_token_lines(args.sentences) if args.sentences else None
    table = (
        preprocess_ops.AnonymizationTable.load(args.table)
        if args.table
        else preprocess_ops.AnonymizationTable()
    )

    if args.ner_spans:
        # Test-time parsing: normalize raw sentences with external NER
        # spans; there are no graphs or alignments yet.
        if sentences is None:
            raise ValueError("--ner-spans requires --sentences")
        spans_by_id = preprocess_ops.load_ner_spans_jsonl(args.ner_spans)
        ids = [str(i) for i in range(len(sentences))]
        normalized = []
        per_example_records = []
        for example_id, sentence in zip(ids, sentences):
            tokens, records = preprocess_ops.ner_normalize(
                sentence, spans_by_id.get(example_id, []), table
            )
            normalized.append(tokens)
            per_example_records.append(records)
        if args.out_sentences:
            linearize_ops.write_sequences(args.out_sentences, normalized)
        if args.out_records:
            preprocess_ops.save_records_jsonl(
                args.out_records, list(zip(ids, per_example_records))
            )
        return 0

    if not args.out_graphs:
        raise ValueError("preprocess with --amr needs --out-graphs")
    graphs = graph_ops.read_amr_file(args.amr)
    if sentences is not None and len(sentences) != len(graphs):
        raise ValueError(
            f"{args.amr} has {len(graphs)} graphs but {args.sentences} has "
            f"{len(sentences)} sentences"
        )
    alignments = (
        preprocess_ops.AlignmentSet.load_jsonl(args.alignments) if args.alignments else None
    )

    trees = []
    per_example_records = []
    ids = []
    anonymized_sentences = []
    for i, graph in enumerate(graphs):
        example_id = _example_id(graph, i)
        ids.append(example_id)
        tree, records = preprocess_ops.preprocess_graph(
            graph,
            registry,
            mode=config.mode,
            anonymize=config.anonymization,
            ne_clusters=config.ne_clusters,
        )
        if sentences is not None:
            sentence = sentences[i]
            if config.anonymization and alignments is not None:
                sentence = preprocess_ops.anonymize_sentence(
                    sentence, alignments.for_example(example_id), records
                )
            anonymized_sentences.append(sentence)
        trees.append(tree)
        per_example_records.append(records)

    order = _make_order(config, trees)
    sequences = [
        linearize_ops.linearize(
            tree, order, example_id=example_id, scope_markers=config.scope_markers
        )
        for tree, example_id in zip(trees, ids)
    ]
    linearize_ops.write_sequences(args.out_graphs, sequences)
    if sentences is not None and args.out_sentences:
        linearize_ops.write_sequences(args.out_sentences, anonymized_sentences)
    if args.out_records:
        preprocess_ops.save_records_jsonl(
            args.out_records, list(zip(ids, per_example_records))
        )
    if args.save_table:
        for records in per_example_records:
            table.observe_records(records)
        table.save(args.save_table)
    return 0


def _cmd_linearize(args) -> int:
    config = _pipeline_config(args)
    graphs = graph_ops.read_amr_file(args.amr)
    trees = [preprocess_ops.simplify_graph(g, config.mode) for g in graphs]
    order = _make_order(config, trees)
    sequences = [
        linearize_ops.linearize(
            tree, order, example_id=_example_id(g, i), scope_markers=config.scope_markers
        )
        for i, (tree, g) in enumerate(zip(trees, graphs))
    ]
    linearize_ops.write_sequences(args.out, sequences)
    return 0


def _cmd_delinearize(args) -> int:
    sequences = linearize_ops.read_sequences(args.seq)
    graphs = []
    reports = []
    for i, seq in enumerate(sequences):
        tree, report = linearize_ops.delinearize(seq)
        graphs.append(linearize_ops.to_full_amr(tree))
        reports.append({"line": i + 1, "repairs": report.actions})
        for action in report.actions:
            print(f"{args.seq}:{i + 1}: repaired: {action}", file=sys.stderr)
    graph_ops.write_amr_file(args.out, graphs)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            for obj in reports:
                f.write(json.dumps(obj, sort_keys=True) + "\n")
    return 0


def _cmd_deanonymize(args) -> int:
    token_lines = _read_token_lines(args.tokens)
    per_example = preprocess_ops.load_records_jsonl(args.records)
    if len(per_example) != len(token_lines):
        raise ValueError(
            f"{args.records} has {len(per_example)} examples but {args.tokens} "
            f"has {len(token_lines)} lines"
        )
    table = preprocess_ops.AnonymizationTable.load(args.table)
    out_lines = []
    for (example_id, records), tokens in zip(per_example, token_lines):
        restored, flags = preprocess_ops.deanonymize_output(tokens, records, table)
        out_lines.append(restored)
        for flag in flags:
            print(f"{example_id}: {flag}", file=sys.stderr)
    linearize_ops.write_sequences(args.out, out_lines)
    return 0


def _cmd_stats(args) -> int:
    if args.stats_command == "vocab":
        vocab = corpus_ops.build_vocabulary(_read_token_lines(args.input))
        if args.json:
            print(
                json.dumps(
                    {
                        "types": vocab.types,
                        "tokens": vocab.total_tokens,
                        "counts": dict(sorted(vocab.counts.items())),
                    },
                    indent=2,
                    sort_keys=True,
                )
            )
        else:
            print(f"types {vocab.types}")
            print(f"tokens {vocab.total_tokens}")
        return 0
    if args.stats_command == "oov":
        thresholds = [int(t) for t in args.thresholds.split(",")]
        train_lines = _read_token_lines(args.train)
        vocab = corpus_ops.build_vocabulary(train_lines, built_from=args.train)
        rows = []
        for heldout in args.heldout:
            lines = _read_token_lines(heldout)
            rates = {t: corpus_ops.oov_rate(vocab, lines, t) for t in thresholds}
            rows.append({"corpus": heldout, "examples": len(lines), "oov": rates})
        if args.json:
            print(json.dumps(rows, indent=2, sort_keys=True))
        else:
            width = max(len("Corpus"), *(len(r["corpus"]) for r in rows)) + 2
            header = "Corpus".ljust(width) + "Examples".rjust(9)
            header += "".join(f"OOV@{t}".rjust(9) for t in thresholds)
            print(header)
            for row in rows:
                line = row["corpus"].ljust(width) + f"{row['examples']:>9d}"
                line += "".join(f"{row['oov'][t]:>9.1f}" for t in thresholds)
                print(line)
        return 0
    graphs = graph_ops.read_amr_file(args.amr)
    ids = [_example_id(g, i) for i, g in enumerate(graphs)]
    alignments = (
        preprocess_ops.AlignmentSet.load_jsonl(args.alignments) if args.alignments else None
    )
    stats = corpus_ops.edge_order_stats(graphs, alignments, ids)
    if args.json:
        print(stats.to_json())
    else:
        print(f"pairs {len(stats.pair_counts)}")
        print(f"consistency {stats.consistency_fraction():.1f}%")
        agreement = stats.realization_agreement()
        if agreement is not None:
            print(f"realization-agreement {agreement:.1f}%")
    return 0


def _cmd_sample(args) -> int:
    vocab = corpus_ops.build_vocabulary(_read_token_lines(args.vocab_from))
    exclude: set[str] = set()
    for path in args.exclude:
        with open(path, encoding="utf-8") as f:
            exclude.update(line.strip() for line in f if line.strip())
    if args.stream == "-":
        stream = [line.rstrip("\n") for line in sys.stdin]
    else:
        with open(args.stream, encoding="utf-8") as f:
            stream = f.read().splitlines()
    result = corpus_ops.sample_external(
        stream, vocab, exclude=exclude, target_size=args.size, seed=args.seed
    )
    with open(args.out, "w", encoding="utf-8") as f:
        for sentence in result.sentences:
            f.write(sentence + "\n")
    if result.insufficient:
        print(
            f"insufficient candidates: wanted {args.size}, got {len(result.sentences)}",
            file=sys.stderr,
        )
    return 0


def _cmd_smatch(args) -> int:
    golds = graph_ops.read_amr_file(args.gold)
    preds = graph_ops.read_amr_file(args.pred)
    result = metrics_ops.smatch_corpus(
        golds, preds, restarts=args.restarts, exhaustive=args.exhaustive
    )
    if args.json:
        print(
            json.dumps(
                {
                    "precision": result.precision,
                    "recall": result.recall,
                    "f1": result.f1,
                    "matched": result.matched,
                    "gold_triples": result.gold_triples,
                    "pred_triples": result.pred_triples,
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print(result.line())
    return 0


def _cmd_bleu(args) -> int:
    hyps = _read_token_lines(args.hyp)
    refs = _read_token_lines(args.ref)
    result = metrics_ops.bleu(hyps, refs)
    if args.json:
        print(
            json.dumps(
                {
                    "bleu": result.score,
                    "precisions": list(result.precisions),
                    "brevity_penalty": result.brevity_penalty,
                    "hyp_length": result.hyp_length,
                    "ref_length": result.ref_length,
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print(result.line())
    return 0


def _load_split(data_dir: Path, name: str, start_index: int) -> list[corpus_ops.Example]:
    amr_path = data_dir / f"{name}.amr"
    snt_path = data_dir / f"{name}.snt"
    if not amr_path.exists():
        if name == "test":
            return []
        raise FileNotFoundError(f"missing {amr_path}")
    graphs = graph_ops.read_amr_file(amr_path)
    with open(snt_path, encoding="utf-8") as f:
        sentences = [line.split() for line in f.read().splitlines()]
    if len(graphs) != len(sentences):
        raise ValueError(f"{amr_path} and {snt_path} differ in example count")
    return [
        corpus_ops.Example(id=str(start_index + i), sentence=s, graph=g)
        for i, (s, g) in enumerate(zip(sentences, graphs))
    ]


def _cmd_train(args) -> int:
    data_dir = Path(args.data)
    train = _load_split(data_dir, "train", 0)
    dev = _load_split(data_dir, "dev", len(train))
    test = _load_split(data_dir, "test", len(train) + len(dev))
    data = corpus_ops.SplitSet(train=train, dev=dev, test=test)

    schedule = harness_ops.TrainingSchedule(
        k=args.k,
        iterations=args.iterations,
        epochs_initial=args.epochs_initial,
        epochs_pretrain=args.epochs_pretrain,
        beam=args.beam,
    )
    if args.mock:
        parser_model = harness_ops.mock_model(args.mock)
        generator_model = harness_ops.mock_model(args.mock)
    else:
        command = args.model_cmd.split()
        work = Path(args.work_dir)
        parser_model = harness_ops.external_model(
            command, work / "parser", timeout=args.timeout
        )
        generator_model = harness_ops.external_model(
            command, work / "generator", timeout=args.timeout
        )

    def external():
        with open(args.external, encoding="utf-8") as f:
            return f.read().splitlines()

    try:
        _, _, ledger = harness_ops.paired_training(
            data,
            external,
            parser_model,
            generator_model,
            schedule,
            parser_metric=args.parser_metric,
            generator_metric=args.generator_metric,
            fine_tune=not args.no_fine_tune,
            seed=args.seed,
        )
    except _MODEL_ERRORS as exc:
        partial = getattr(exc, "run_ledger", None)
        if args.ledger and partial is not None:
            partial.save(args.ledger)
        raise
    if args.ledger:
        ledger.save(args.ledger)
    print("sample sizes:", " ".join(str(s) for s in ledger.sample_sizes()))
    for entry in ledger.entries:
        if entry.dev_score is not None:
            print(f"{entry.phase}\tdev {entry.dev_score:.4f}")
    return 0


_COMMANDS = {
    "preprocess": _cmd_preprocess,
    "linearize": _cmd_linearize,
    "delinearize": _cmd_delinearize,
    "deanonymize": _cmd_deanonymize,
    "stats": _cmd_stats,
    "sample": _cmd_sample,
    "smatch": _cmd_smatch,
    "bleu": _cmd_bleu,
    "train": _cmd_train,
}

_DATA_ERRORS = (
    graph_ops.PenmanParseError,
    preprocess_ops.MalformedDateEntity,
    preprocess_ops.OverlappingSpans,
    corpus_ops.EmptyCorpus,
    metrics_ops.LengthMismatch,
    linearize_ops.EmptyInventory,
    FileNotFoundError,
    json.JSONDecodeError,
    ValueError,
)

_MODEL_ERRORS = (harness_ops.ProtocolViolation, harness_ops.Timeout)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except _MODEL_ERRORS as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return MODEL_ERROR
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
