"""Paired self-training orchestration over a pluggable model interface.

The procedure: train an initial parser on the annotated data, then run N
self-training iterations (parse an external sample, pre-train fresh
parameters on the parsed pairs, fine-tune on the annotated data), growing
the sample tenfold per iteration. The final sample is parsed once more to
pre-train the generator, which is then fine-tuned on the annotated data.
After every pre-training epoch a fine-tuning attempt is evaluated on the
dev set; the best-scoring attempt wins the phase.

Models plug in either in-process (the deterministic mocks) or across a
process boundary via a job-directory wire protocol.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol

from .corpus import SplitSet, Vocabulary, build_vocabulary, sample_external
from .linearize import HumanOrder, delinearize, linearize, to_full_amr
from .metrics import bleu, smatch_corpus
from .preprocess import simplify_graph


class ProtocolViolation(RuntimeError):
    pass


class Timeout(RuntimeError):
    pass


Pair = tuple[str, str]


@dataclass
class TrainSettings:
    """One training job's knobs, as carried by the wire protocol."""

    learning_rate: float
    epochs: int
    lr_decay: float = 0.8
    seed: int = 0
    beam: int = 5
    batch: int = 100
    dropout: float = 0.5
    initial_params: Any = None


@dataclass
class TrainOutcome:
    params: Any
    dev_scores: list[float]


class ModelInterface(Protocol):
    def train(self, pairs: list[Pair], dev_pairs: list[Pair], settings: TrainSettings) -> TrainOutcome:
        ...

    def predict(self, inputs: list[str], params: Any, beam_size: int) -> list[str]:
        ...


@dataclass
class TrainingSchedule:
    """Iteration plan and hyperparameters; defaults follow the published
    configuration (initial external sample 200k, 3 self-training rounds,
    beam 5)."""

    k: int = 200_000
    iterations: int = 3
    lr_initial_parser: float = 0.5
    lr_pretrain: float = 1.0
    lr_finetune: float = 0.1
    lr_decay: float = 0.8
    epochs_initial: int = 60
    epochs_pretrain: int = 20
    epochs_finetune: int = 1
    beam: int = 5
    batch: int = 100
    dropout: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 < self.lr_decay < 1.0:
            raise ValueError("lr_decay must be in (0, 1)")


@dataclass
class PhaseRecord:
    phase: str
    sample_size: int | None = None
    epochs: int | None = None
    dev_score: float | None = None
    checkpoint: str | None = None
    note: str = ""


class RunLedger:
    """Append-only log of every phase of a paired-training run."""

    def __init__(self):
        self.entries: list[PhaseRecord] = []

    def add(self, **kwargs) -> PhaseRecord:
        record = PhaseRecord(**kwargs)
        self.entries.append(record)
        return record

    def sample_sizes(self) -> list[int]:
        return [
            e.sample_size
            for e in self.entries
            if e.phase.startswith("sample") and e.sample_size is not None
        ]

    def phases(self) -> list[str]:
        return [e.phase for e in self.entries]

    def to_json(self) -> str:
        return json.dumps([asdict(e) for e in self.entries], indent=2, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json() + "\n")


# --- dev-set metrics ---------------------------------------------------------

def exact_match_metric(predictions: list[str], targets: list[str]) -> float:
    if not targets:
        return 0.0
    hits = sum(1 for p, t in zip(predictions, targets) if p.split() == t.split())
    return hits / len(targets)


def smatch_metric(predictions: list[str], targets: list[str], restarts: int = 4) -> float:
    """SMATCH F1 between predicted and target linearizations; both sides
    go through delinearize (with repair) and variable restoration."""
    golds = [to_full_amr(delinearize(t.split())[0]) for t in targets]
    preds = [to_full_amr(delinearize(p.split())[0]) for p in predictions]
    return smatch_corpus(golds, preds, restarts=restarts).f1


def bleu_metric(predictions: list[str], targets: list[str]) -> float:
    return bleu([p.split() for p in predictions], [t.split() for t in targets]).score


METRICS: dict[str, Callable[[list[str], list[str]], float]] = {
    "exact": exact_match_metric,
    "smatch": smatch_metric,
    "bleu": bleu_metric,
}


# --- mock models -------------------------------------------------------------

class MockModel:
    """Deterministic in-process stand-in.

    ``identity`` echoes the input, ``reverse`` reverses its tokens, and
    ``memorize`` replays training targets for seen inputs and emits the
    empty string otherwise.
    """

    BEHAVIORS = ("identity", "memorize", "reverse")

    def __init__(self, behavior: str):
        if behavior not in self.BEHAVIORS:
            raise ValueError(f"behavior must be one of {self.BEHAVIORS}")
        self.behavior = behavior

    def train(self, pairs, dev_pairs, settings: TrainSettings) -> TrainOutcome:
        memory: dict[str, str] = {}
        if settings.initial_params:
            memory.update(settings.initial_params.get("memory", {}))
        if self.behavior == "memorize":
            memory.update({src: tgt for src, tgt in pairs})
        params = {"behavior": self.behavior, "memory": memory}
        score = exact_match_metric(
            self.predict([s for s, _ in dev_pairs], params, settings.beam),
            [t for _, t in dev_pairs],
        )
        return TrainOutcome(params=params, dev_scores=[score] * settings.epochs)

    def predict(self, inputs, params, beam_size: int) -> list[str]:
        behavior = params["behavior"] if params else self.behavior
        if behavior == "identity":
            return list(inputs)
        if behavior == "reverse":
            return [" ".join(reversed(s.split())) for s in inputs]
        memory = params.get("memory", {}) if params else {}
        return [memory.get(s, "") for s in inputs]


def mock_model(behavior: str) -> MockModel:
    return MockModel(behavior)


# --- external models ---------------------------------------------------------

class ExternalModel:
    """Adapter for an out-of-process model endpoint.

    Each call materializes a job directory: ``train.src``/``train.tgt``/
    ``dev.src``/``dev.tgt`` (or ``pred.src`` for prediction) plus
    ``config.json``, then invokes ``command`` with the directory path.
    The endpoint must exit 0 and write ``checkpoint`` and
    ``dev_scores.json`` (training) or ``pred.tgt`` (prediction).
    Parameters are checkpoint paths, opaque to the harness.
    """

    def __init__(self, command: list[str], work_dir, timeout: float | None = None):
        self.command = list(command)
        self.work_dir = Path(work_dir)
        self.timeout = timeout
        self.jobs = 0

    def _new_job_dir(self, kind: str) -> Path:
        job_dir = self.work_dir / f"job-{self.jobs:04d}-{kind}"
        self.jobs += 1
        job_dir.mkdir(parents=True, exist_ok=True)
        return job_dir

    def _invoke(self, job_dir: Path) -> None:
        try:
            proc = subprocess.run(
                [*self.command, str(job_dir)],
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise Timeout(f"endpoint exceeded {self.timeout}s on {job_dir}") from exc
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout or "").strip()[-2000:]
            raise ProtocolViolation(
                f"endpoint exited {proc.returncode} on {job_dir}: {tail}"
            )

    @staticmethod
    def _write_lines(path: Path, lines: Iterable[str]) -> None:
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    def _write_config(self, job_dir: Path, config: dict) -> None:
        (job_dir / "config.json").write_text(
            json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def train(self, pairs, dev_pairs, settings: TrainSettings) -> TrainOutcome:
        job_dir = self._new_job_dir("train")
        self._write_lines(job_dir / "train.src", [s for s, _ in pairs])
        self._write_lines(job_dir / "train.tgt", [t for _, t in pairs])
        self._write_lines(job_dir / "dev.src", [s for s, _ in dev_pairs])
        self._write_lines(job_dir / "dev.tgt", [t for _, t in dev_pairs])
        self._write_config(
            job_dir,
            {
                "job": "train",
                "learning_rate": settings.learning_rate,
                "epochs": settings.epochs,
                "lr_decay": settings.lr_decay,
                "seed": settings.seed,
                "beam": settings.beam,
                "batch": settings.batch,
                "dropout": settings.dropout,
                "init_checkpoint": settings.initial_params,
            },
        )
        self._invoke(job_dir)
        checkpoint = job_dir / "checkpoint"
        scores_file = job_dir / "dev_scores.json"
        if not checkpoint.exists():
            raise ProtocolViolation(f"endpoint wrote no checkpoint in {job_dir}")
        if not scores_file.exists():
            raise ProtocolViolation(f"endpoint wrote no dev_scores.json in {job_dir}")
        try:
            dev_scores = json.loads(scores_file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"dev_scores.json is not valid JSON in {job_dir}") from exc
        return TrainOutcome(params=str(checkpoint), dev_scores=list(dev_scores))

    def predict(self, inputs, params, beam_size: int) -> list[str]:
        job_dir = self._new_job_dir("predict")
        self._write_lines(job_dir / "pred.src", inputs)
        self._write_config(
            job_dir,
            {
                "job": "predict",
                "beam": beam_size,
                "init_checkpoint": params,
            },
        )
        self._invoke(job_dir)
        out_file = job_dir / "pred.tgt"
        if not out_file.exists():
            raise ProtocolViolation(f"endpoint wrote no pred.tgt in {job_dir}")
        lines = out_file.read_text(encoding="utf-8").splitlines()
        if len(lines) != len(inputs):
            raise ProtocolViolation(
                f"endpoint returned {len(lines)} predictions for {len(inputs)} inputs"
            )
        return lines


def external_model(command: list[str], work_dir, timeout: float | None = None) -> ExternalModel:
    return ExternalModel(command, work_dir, timeout)


# --- the paired training procedure -------------------------------------------

def _graph_line(graph) -> str:
    return " ".join(linearize(simplify_graph(graph, "parsing"), HumanOrder()))


def default_pairs(split: list) -> tuple[list[str], list[str]]:
    """(sentence line, linearized graph line) columns for a split."""
    sentences = [" ".join(e.sentence) for e in split]
    graphs = [_graph_line(e.graph) for e in split]
    return sentences, graphs


class _Trainer:
    """Shared pre-train/fine-tune loop with per-epoch checkpoint selection."""

    def __init__(self, schedule: TrainingSchedule, ledger: RunLedger, seed: int):
        self.schedule = schedule
        self.ledger = ledger
        self.seed = seed
        self.current_phase = "setup"

    def settings(self, lr: float, epochs: int, initial_params=None) -> TrainSettings:
        s = self.schedule
        return TrainSettings(
            learning_rate=lr,
            epochs=epochs,
            lr_decay=s.lr_decay,
            seed=self.seed,
            beam=s.beam,
            batch=s.batch,
            dropout=s.dropout,
            initial_params=initial_params,
        )

    def pretrain_finetune(
        self,
        model: ModelInterface,
        external_pairs: list[Pair],
        annotated_pairs: list[Pair],
        dev_pairs: list[Pair],
        metric: Callable[[list[str], list[str]], float],
        prefix: str,
        fine_tune: bool,
    ):
        """Pre-train fresh parameters on external pairs, attempting a
        fine-tune on the annotated data after every epoch; returns the
        attempt with the best dev score (ties keep the earliest epoch)."""
        s = self.schedule
        dev_inputs = [src for src, _ in dev_pairs]
        dev_targets = [tgt for _, tgt in dev_pairs]
        best_score = None
        best_params = None
        best_name = None
        pretrained = None
        lr = s.lr_pretrain
        previous = None
        for epoch in range(1, s.epochs_pretrain + 1):
            self.current_phase = f"{prefix}_epoch_{epoch}"
            outcome = model.train(
                external_pairs, dev_pairs, self.settings(lr, 1, initial_params=pretrained)
            )
            pretrained = outcome.params
            if fine_tune:
                tuned = model.train(
                    annotated_pairs,
                    dev_pairs,
                    self.settings(s.lr_finetune, s.epochs_finetune, initial_params=pretrained),
                )
                candidate = tuned.params
            else:
                candidate = pretrained
            score = metric(model.predict(dev_inputs, candidate, s.beam), dev_targets)
            name = f"{prefix}-epoch-{epoch}"
            self.ledger.add(phase=f"{prefix}_epoch_{epoch}", dev_score=score, checkpoint=name)
            if best_score is None or score > best_score:
                best_score, best_params, best_name = score, candidate, name
            if previous is not None and score <= previous:
                lr *= s.lr_decay
            previous = score
        self.ledger.add(
            phase=f"{prefix}_selected",
            epochs=s.epochs_pretrain,
            dev_score=best_score,
            checkpoint=best_name,
        )
        return best_params, best_score


def paired_training(
    data: SplitSet,
    external: Callable[[], Iterable[str]],
    parser: ModelInterface,
    generator: ModelInterface,
    schedule: TrainingSchedule,
    *,
    parser_metric: str | Callable = "smatch",
    generator_metric: str | Callable = "bleu",
    fine_tune: bool = True,
    seed: int = 0,
    sample_vocab: Vocabulary | None = None,
):
    """Run the paired training procedure; returns (parser params,
    generator params, ledger).

    ``external`` is a factory returning a fresh sentence iterator per
    sampling round; samples are filtered to the training-side vocabulary
    and kept disjoint from the annotated data and from earlier samples.
    A short sample is a ledger warning, not a failure.
    """
    if not data.train:
        raise ValueError("training split is empty")
    p_metric = METRICS[parser_metric] if isinstance(parser_metric, str) else parser_metric
    g_metric = METRICS[generator_metric] if isinstance(generator_metric, str) else generator_metric

    s = schedule
    ledger = RunLedger()
    trainer = _Trainer(s, ledger, seed)

    train_snt, train_amr = default_pairs(data.train)
    dev_snt, dev_amr = default_pairs(data.dev)
    parser_train = list(zip(train_snt, train_amr))
    parser_dev = list(zip(dev_snt, dev_amr))
    generator_train = list(zip(train_amr, train_snt))
    generator_dev = list(zip(dev_amr, dev_snt))

    vocab = sample_vocab or build_vocabulary(train_snt, side="nl", built_from="train")
    exclude = set(data.all_sentence_strings())
    draws = 0

    def draw(size: int, phase: str) -> list[str]:
        nonlocal draws
        result = sample_external(
            external(), vocab, exclude=exclude, target_size=size, seed=seed + draws
        )
        draws += 1
        exclude.update(result.sentences)
        note = ""
        if result.insufficient:
            note = (
                f"insufficient candidates: wanted {size}, got {len(result.sentences)}"
            )
        ledger.add(phase=phase, sample_size=len(result.sentences), note=note)
        return result.sentences

    try:
        # Initial parser on the annotated data.
        trainer.current_phase = "parser_initial"
        outcome = parser.train(
            parser_train, parser_dev, trainer.settings(s.lr_initial_parser, s.epochs_initial)
        )
        parser_params = outcome.params
        score = p_metric(
            parser.predict([x for x, _ in parser_dev], parser_params, s.beam),
            [y for _, y in parser_dev],
        )
        ledger.add(
            phase="parser_initial",
            epochs=s.epochs_initial,
            dev_score=score,
            checkpoint="parser-initial",
        )

        # Self-training iterations.
        sample: list[str] = []
        if s.iterations >= 1:
            sample = draw(s.k, "sample_1")
        for i in range(1, s.iterations + 1):
            trainer.current_phase = f"parser_selftrain_{i}_parse"
            parsed = parser.predict(sample, parser_params, s.beam)
            ledger.add(phase=f"parser_selftrain_{i}_parse", sample_size=len(sample))
            external_pairs = list(zip(sample, parsed))
            parser_params, _ = trainer.pretrain_finetune(
                parser,
                external_pairs,
                parser_train,
                parser_dev,
                p_metric,
                f"parser_selftrain_{i}",
                fine_tune,
            )
            if i < s.iterations:
                # The final pass would sample a set nothing reads: the
                # generator step below draws its own fresh sample.
                sample = draw(s.k * 10**i, f"sample_{i + 1}")

        # Generator pre-training on the final parsed sample.
        final_sample = draw(s.k * 10**s.iterations, "sample_final")
        trainer.current_phase = "generator_parse"
        parsed = parser.predict(final_sample, parser_params, s.beam)
        ledger.add(phase="generator_parse", sample_size=len(final_sample))
        generator_pairs = list(zip(parsed, final_sample))
        generator_params, _ = trainer.pretrain_finetune(
            generator,
            generator_pairs,
            generator_train,
            generator_dev,
            g_metric,
            "generator",
            fine_tune,
        )
    except Exception as exc:
        # Model failures propagate, with the failing phase on record and
        # the partial ledger attached for inspection.
        ledger.add(phase=trainer.current_phase, note=f"model failure: {exc}")
        exc.run_ledger = ledger  # type: ignore[attr-defined]
        raise
    return parser_params, generator_params, ledger
