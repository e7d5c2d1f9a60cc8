"""Retrieval-augmented generation pipelines, offline-testable end to end.

The package wires together dense cosine retrieval over a flat vector
index, index augmentation with rewrites and synthetic pseudo-queries,
low-rank adapter arithmetic, selective chain-of-thought prompt assembly,
three pipeline variants (standard, augmented-index, two-pass), and a QA
evaluation harness with exact-match / token-F1 scoring and per-type
aggregation.
"""

__version__ = "0.1.0"

from .datasets import (
    Corpus,
    DatasetKind,
    Document,
    EvalExample,
    ReasoningType,
    load_pubmedqa,
    load_twowiki,
    sample_examples,
)
from .embedding import EmbedderKind, EmbedderSpec, EmbeddingVector, embed, embed_batch
from .errors import (
    ConfigError,
    FormatError,
    LoadError,
    PipelineStageError,
    ProtocolError,
    RagError,
    TransportError,
    ValidationError,
)
from .index import (
    EntryKind,
    IndexEntry,
    RetrievalHit,
    VectorIndex,
    build_index,
    cosine_similarity,
    load_index,
    retrieve_top_k,
    save_index,
)
from .augmentation import (
    AugmentationConfig,
    AugmentationReport,
    SyntheticQA,
    augment_index,
    generate_synthetic_qa,
    rewrite_document,
)
from .lora import (
    LinearLayer,
    LoraAdapter,
    ScalingMode,
    load_adapter,
    load_adapter_mode,
    load_layer,
    lora_forward,
    merge_adapter,
    parameter_reduction,
    save_adapter,
    save_layer,
    scaling_factor,
)
from .prompting import (
    CotPolicy,
    Demo,
    ExtractedAnswer,
    PromptBundle,
    PromptTemplate,
    assemble_prompt,
    builtin_template,
    decide_cot,
    extract_final_answer,
    load_template,
)
from .generation import GenerationResult, GeneratorKind, GeneratorSpec, generate, prompt_fingerprint
from .pipelines import (
    PipelineConfig,
    PipelineTrace,
    PipelineVariant,
    run_batch,
    run_da,
    run_prag,
    run_standard,
    validate_config,
)
from .evaluation import (
    MetricsReport,
    ScoredExample,
    aggregate,
    compare_reports,
    exact_match,
    normalize_answer,
    score_run,
    token_f1,
)
