"""amrseq: the data pathway for sequence-to-sequence AMR parsing and
generation — Penman graph I/O, preprocessing and anonymization,
graph/sequence linearization, corpus statistics and sampling, SMATCH and
BLEU scoring, and paired self-training orchestration."""

from .graph import (
    AmrGraph,
    Edge,
    Node,
    PenmanParseError,
    parse_penman,
    read_amr_file,
    serialize_penman,
    triples,
    write_amr_file,
)
from .preprocess import (
    AlignmentSet,
    AnonymizationRecord,
    AnonymizationTable,
    EntityTypeRegistry,
    SimplifiedGraph,
    anonymize_dates,
    anonymize_graph,
    anonymize_sentence,
    cluster_entities,
    deanonymize_output,
    ner_normalize,
    preprocess_graph,
    recover_amr_entities,
    simplify_graph,
)
# The linearize *function* stays in its module (amrseq.linearize.linearize)
# so the submodule name is not shadowed.
from .linearize import (
    GlobalRandomOrder,
    HumanOrder,
    RandomOrder,
    RepairReport,
    delinearize,
    make_global_order,
    to_full_amr,
)
from .corpus import (
    EdgeOrderStats,
    Example,
    SampleResult,
    SplitSet,
    Vocabulary,
    build_vocabulary,
    edge_order_stats,
    oov_rate,
    sample_external,
)
from .metrics import BleuResult, SmatchResult, bleu, smatch, smatch_corpus
from .harness import (
    MockModel,
    RunLedger,
    TrainingSchedule,
    external_model,
    mock_model,
    paired_training,
)

__version__ = "0.1.0"
