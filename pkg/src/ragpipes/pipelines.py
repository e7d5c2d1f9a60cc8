"""End-to-end pipeline variants: standard, augmented-index, and two-pass.

* ``STANDARD`` embeds the question, retrieves top-k evidence (parent
  deduplication always on), assembles the prompt, generates once.
* ``DA`` is the same flow over an augmented index; the config is rejected
  unless the index actually contains augmented entries.
* ``PRAG`` generates twice: pass 1 answers from the question alone (the
  model's own prior); pass 2 retrieves evidence and re-asks with the
  pass-1 answer injected as a labeled initial hypothesis, letting the
  model cross-check its prior against the evidence. Pass 2's answer is
  authoritative.

Empty retrieval is a flagged soft condition, never an error: generation
always runs. Traces record every stage; their canonical JSON form drops
wall-clock timings so stub-driven reruns serialize byte-identically.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .datasets import DatasetKind, EvalExample
from .embedding import EmbedderSpec, embed
from .errors import PipelineStageError, RagError, ValidationError
from .generation import GeneratorSpec, generate, prompt_fingerprint
from .index import EntryKind, RetrievalHit, VectorIndex, retrieve_top_k
from .prompting import (
    CotPolicy,
    PromptTemplate,
    assemble_prompt,
    decide_cot_for_kind,
)
from .prompting import extract_final_answer

FLAG_MARKER_MISSING = "marker-missing"
FLAG_EMPTY_ANSWER = "empty-answer"
FLAG_RETRIEVAL_EMPTY = "retrieval-empty"


class PipelineVariant(Enum):
    STANDARD = "standard"
    DA = "da"
    PRAG = "prag"


@dataclass(frozen=True)
class PipelineConfig:
    variant: PipelineVariant
    top_k: int
    cot_policy: CotPolicy
    template: PromptTemplate
    index: VectorIndex
    embedder: EmbedderSpec
    generator: GeneratorSpec
    adapter_path: str | None = None  # provenance of the parametric component
    dataset: DatasetKind = DatasetKind.OTHER
    concurrency: int = 1

    def __post_init__(self):
        if self.top_k < 0:
            raise ValidationError("top_k must be >= 0")
        if self.concurrency < 1:
            raise ValidationError("concurrency must be >= 1")


def validate_config(config: PipelineConfig) -> None:
    """Reject configs whose parts cannot satisfy the chosen variant."""
    if config.embedder.dim != config.index.dim:
        raise ValidationError(
            f"embedder dim {config.embedder.dim} != index dim {config.index.dim}"
        )
    if config.variant is PipelineVariant.DA:
        augmented = len(config.index) - config.index.count_by_kind(EntryKind.ORIGINAL)
        if augmented == 0:
            raise ValidationError(
                "DA pipeline requires an augmented index, but every entry is original"
            )
    if config.dataset is DatasetKind.TWOWIKI or config.cot_policy.single_hop:
        config.template.validate_for_cot()


@dataclass(frozen=True)
class TraceHit:
    """Retrieval evidence as recorded in a trace (summary of a hit)."""

    entry_id: str
    parent_doc_id: str
    entry_kind: str
    score: float
    rank: int


@dataclass(frozen=True)
class PipelineTrace:
    question: str
    final_answer: str
    hits: tuple[TraceHit, ...] = ()
    prompt_fingerprints: tuple[str, ...] = ()
    pass1_answer: str | None = None
    flags: frozenset[str] = frozenset()
    timings: dict[str, float] = field(default_factory=dict, compare=False)
    example_id: str | None = None
    error: str | None = None


def _to_trace_hits(hits: list[RetrievalHit]) -> tuple[TraceHit, ...]:
    return tuple(
        TraceHit(
            entry_id=h.entry.entry_id,
            parent_doc_id=h.entry.parent_doc_id,
            entry_kind=h.entry.entry_kind.name.lower(),
            score=h.score,
            rank=h.rank,
        )
        for h in hits
    )


def _staged(stage: str, fn, *args, timings: dict[str, float] | None = None, **kwargs):
    start = time.perf_counter()
    try:
        result = fn(*args, **kwargs)
    except RagError as exc:
        raise PipelineStageError(stage, exc) from exc
    if timings is not None:
        timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - start
    return result


def _retrieve_evidence(question, config, timings) -> list[RetrievalHit]:
    qvec = _staged("embed", embed, question, config.embedder, timings=timings)
    return _staged(
        "retrieve",
        retrieve_top_k,
        config.index,
        qvec,
        config.top_k,
        timings=timings,
        dedupe_parents=True,
    )


def _generate_and_extract(prompt_text, config, cot, stage, timings):
    result = _staged(stage, generate, prompt_text, config.generator, timings=timings)
    extracted = extract_final_answer(result.text, cot)
    flags = set()
    if extracted.marker_missing:
        flags.add(FLAG_MARKER_MISSING)
    if extracted.empty:
        flags.add(FLAG_EMPTY_ANSWER)
    return extracted.text, flags


def _run_single_pass(question, config, dataset, example_id) -> PipelineTrace:
    timings: dict[str, float] = {}
    flags: set[str] = set()
    cot = decide_cot_for_kind(dataset, config.cot_policy)
    hits = _retrieve_evidence(question, config, timings)
    if not hits:
        flags.add(FLAG_RETRIEVAL_EMPTY)
    bundle = _staged(
        "assemble", assemble_prompt, config.template, question, hits, cot, timings=timings
    )
    answer, gen_flags = _generate_and_extract(bundle.rendered, config, cot, "generate", timings)
    flags |= gen_flags
    return PipelineTrace(
        question=question,
        final_answer=answer,
        hits=_to_trace_hits(hits),
        prompt_fingerprints=(prompt_fingerprint(bundle.rendered),),
        flags=frozenset(flags),
        timings=timings,
        example_id=example_id,
    )


def run_standard(
    question: str,
    config: PipelineConfig,
    dataset: DatasetKind | None = None,
    example_id: str | None = None,
) -> PipelineTrace:
    """Retrieve, prompt, generate once."""
    if config.variant is not PipelineVariant.STANDARD:
        raise ValidationError(f"run_standard called with variant {config.variant.value}")
    return _run_single_pass(question, config, dataset or config.dataset, example_id)


def run_da(
    question: str,
    config: PipelineConfig,
    dataset: DatasetKind | None = None,
    example_id: str | None = None,
) -> PipelineTrace:
    """Standard flow over an augmented index; dedupe keeps evidence unique."""
    if config.variant is not PipelineVariant.DA:
        raise ValidationError(f"run_da called with variant {config.variant.value}")
    validate_config(config)
    return _run_single_pass(question, config, dataset or config.dataset, example_id)


def run_prag(
    question: str,
    config: PipelineConfig,
    dataset: DatasetKind | None = None,
    example_id: str | None = None,
) -> PipelineTrace:
    """Two passes: parametric prior first, evidence-checked answer second.

    The pass-1 answer rides into pass 2 as the labeled hypothesis; pass 2's
    extraction is the final answer.
    """
    if config.variant is not PipelineVariant.PRAG:
        raise ValidationError(f"run_prag called with variant {config.variant.value}")
    dataset = dataset or config.dataset
    timings: dict[str, float] = {}
    flags: set[str] = set()
    cot = decide_cot_for_kind(dataset, config.cot_policy)

    # Pass 1: the question alone, no evidence.
    try:
        pass1_bundle = assemble_prompt(config.template, question, [], cot)
        pass1_answer, pass1_flags = _generate_and_extract(
            pass1_bundle.rendered, config, cot, "parametric-pass", timings
        )
    except PipelineStageError:
        raise
    except RagError as exc:
        raise PipelineStageError("parametric-pass", exc) from exc
    flags |= pass1_flags

    # Pass 2: evidence plus the pass-1 hypothesis.
    try:
        hits = _retrieve_evidence(question, config, timings)
        if not hits:
            flags.add(FLAG_RETRIEVAL_EMPTY)
        pass2_bundle = assemble_prompt(
            config.template, question, hits, cot, prior_answer=pass1_answer
        )
        final_answer, pass2_flags = _generate_and_extract(
            pass2_bundle.rendered, config, cot, "evidence-pass", timings
        )
    except PipelineStageError as exc:
        raise PipelineStageError("evidence-pass", exc.cause) from exc.cause
    except RagError as exc:
        raise PipelineStageError("evidence-pass", exc) from exc
    flags |= pass2_flags
    return PipelineTrace(
        question=question,
        final_answer=final_answer,
        hits=_to_trace_hits(hits),
        prompt_fingerprints=(
            prompt_fingerprint(pass1_bundle.rendered),
            prompt_fingerprint(pass2_bundle.rendered),
        ),
        pass1_answer=pass1_answer,
        flags=frozenset(flags),
        timings=timings,
        example_id=example_id,
    )


_RUNNERS = {
    PipelineVariant.STANDARD: run_standard,
    PipelineVariant.DA: run_da,
    PipelineVariant.PRAG: run_prag,
}


def run_example(example: EvalExample, config: PipelineConfig) -> PipelineTrace:
    runner = _RUNNERS[config.variant]
    return runner(example.question, config, dataset=example.dataset, example_id=example.id)


def run_batch(
    examples: list[EvalExample], config: PipelineConfig
) -> list[tuple[EvalExample, PipelineTrace]]:
    """Run every example, never aborting the batch on per-example failures.

    Results come back in input order regardless of execution interleaving;
    a failed example yields an error trace in its slot.
    """
    if not examples:
        raise ValidationError("run_batch needs at least one example")
    validate_config(config)

    def one(example: EvalExample) -> PipelineTrace:
        try:
            return run_example(example, config)
        except RagError as exc:
            return PipelineTrace(
                question=example.question,
                final_answer="",
                example_id=example.id,
                error=str(exc),
            )

    if config.concurrency == 1:
        traces = [one(ex) for ex in examples]
    else:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            traces = list(pool.map(one, examples))
    return list(zip(examples, traces))


# ---------------------------------------------------------------------------
# Trace serialization (line-delimited JSON)
# ---------------------------------------------------------------------------

def trace_to_dict(trace: PipelineTrace, include_timings: bool = False) -> dict:
    """Canonical dict form; timings are excluded unless asked for, so that
    stub-driven reruns produce byte-identical serialized traces."""
    d = {
        "example_id": trace.example_id,
        "question": trace.question,
        "pass1_answer": trace.pass1_answer,
        "hits": [
            {
                "entry_id": h.entry_id,
                "parent_doc_id": h.parent_doc_id,
                "entry_kind": h.entry_kind,
                "score": h.score,
                "rank": h.rank,
            }
            for h in trace.hits
        ],
        "prompt_fingerprints": list(trace.prompt_fingerprints),
        "final_answer": trace.final_answer,
        "flags": sorted(trace.flags),
        "error": trace.error,
    }
    if include_timings:
        d["timings"] = dict(trace.timings)
    return d


def trace_from_dict(d: dict) -> PipelineTrace:
    return PipelineTrace(
        question=d["question"],
        final_answer=d["final_answer"],
        hits=tuple(
            TraceHit(
                entry_id=h["entry_id"],
                parent_doc_id=h["parent_doc_id"],
                entry_kind=h["entry_kind"],
                score=h["score"],
                rank=h["rank"],
            )
            for h in d.get("hits", [])
        ),
        prompt_fingerprints=tuple(d.get("prompt_fingerprints", ())),
        pass1_answer=d.get("pass1_answer"),
        flags=frozenset(d.get("flags", ())),
        example_id=d.get("example_id"),
        error=d.get("error"),
    )


def save_traces_jsonl(
    results: list[tuple[EvalExample, PipelineTrace]], path
) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for _example, trace in results:
            f.write(json.dumps(trace_to_dict(trace), sort_keys=True, ensure_ascii=False) + "\n")


def load_traces_jsonl(path) -> list[PipelineTrace]:
    traces = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                traces.append(trace_from_dict(json.loads(line)))
    return traces
