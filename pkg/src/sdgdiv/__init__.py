"""sdgdiv: measure how divergent SDG classifications bias language models.

The pipeline joins multi-source publication metadata on exact DOI, applies
each source's SDG classification mechanism, quantifies the classification
overlap, trains one language model per (SDG, source) subset, generates
responses to shared prompt sets under three decoding strategies, and
distills the responses into common/unique noun-phrase frequency reports.
"""

from .corpus_store import (
    JointIndex,
    PublicationRecord,
    SourceStore,
    build_joint_index,
    ingest_records,
    normalize_doi,
)
from .decoding import (
    Contrastive,
    DecodingConfig,
    Nucleus,
    TopK,
    generate_response,
    nucleus_step,
    top_k_step,
)
from .lm_core import NgramModel, SmoothingConfig, Vocabulary, perplexity, tokenize, train
from .overlap import VennPartition, venn_partition
from .phrase_pipeline import (
    CommonUniqueSets,
    PhraseTable,
    common_unique_sets,
    extract_noun_phrases,
    pos_tag,
    threshold_filter,
)
from .query_lang import emit_sql, eval_query, parse_query, pretty_print
from .sdg_classify import SdgSubset, classify_by_labels, classify_by_query, classify_by_score

__version__ = "0.1.0"

__all__ = [
    "JointIndex",
    "PublicationRecord",
    "SourceStore",
    "build_joint_index",
    "ingest_records",
    "normalize_doi",
    "Contrastive",
    "DecodingConfig",
    "Nucleus",
    "TopK",
    "generate_response",
    "nucleus_step",
    "top_k_step",
    "NgramModel",
    "SmoothingConfig",
    "Vocabulary",
    "perplexity",
    "tokenize",
    "train",
    "VennPartition",
    "venn_partition",
    "CommonUniqueSets",
    "PhraseTable",
    "common_unique_sets",
    "extract_noun_phrases",
    "pos_tag",
    "threshold_filter",
    "emit_sql",
    "eval_query",
    "parse_query",
    "pretty_print",
    "SdgSubset",
    "classify_by_labels",
    "classify_by_query",
    "classify_by_score",
    "__version__",
]
