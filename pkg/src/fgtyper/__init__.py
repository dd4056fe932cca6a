"""Zero-shot fine-grained entity typing over an enriched type ontology."""

from .generation import (
    BigramLM,
    GeneratedSample,
    GenerationConfig,
    UniformLM,
    filter_samples,
    generate_training_corpus,
    rescaled_distribution,
    sample_sentence,
)
from .inference import (
    Mention,
    OntologyTyper,
    TypePrediction,
    extract_keywords,
    score_children,
    type_mention,
    type_mention_flat,
)
from .metrics import EvalPair, MetricsReport, evaluate, macro_f1, micro_f1, strict_accuracy
from .model import (
    EntailmentClassifier,
    GatedFusionParams,
    TokenEmbeddingEncoder,
    encode_context,
    encode_topics,
    gated_fuse,
    gce_loss,
    load_model,
    save_model,
)
from .nli_data import LABELS, NLIExample, build_examples, render_hypothesis, to_xy
from .ontology import (
    Enrichment,
    OntologyError,
    TypeNode,
    TypeOntology,
    load_enrichment,
    load_ontology,
    save_enrichment,
    save_ontology,
)

__version__ = "0.1.0"

__all__ = [
    "BigramLM",
    "EntailmentClassifier",
    "Enrichment",
    "EvalPair",
    "GatedFusionParams",
    "GeneratedSample",
    "GenerationConfig",
    "LABELS",
    "Mention",
    "MetricsReport",
    "NLIExample",
    "OntologyError",
    "OntologyTyper",
    "TokenEmbeddingEncoder",
    "TypeNode",
    "TypeOntology",
    "TypePrediction",
    "UniformLM",
    "build_examples",
    "encode_context",
    "encode_topics",
    "evaluate",
    "extract_keywords",
    "filter_samples",
    "gated_fuse",
    "gce_loss",
    "generate_training_corpus",
    "load_enrichment",
    "load_model",
    "load_ontology",
    "macro_f1",
    "micro_f1",
    "render_hypothesis",
    "rescaled_distribution",
    "sample_sentence",
    "save_enrichment",
    "save_model",
    "save_ontology",
    "score_children",
    "strict_accuracy",
    "to_xy",
    "type_mention",
    "type_mention_flat",
]
