"""Retrieval-index augmentation with rewrites and synthetic QA pairs.

Each corpus document can contribute two kinds of extra index entries:

* rewrites -- paraphrases produced by a configured generator, accepted
  only if every protected term present in the source also appears
  verbatim (case-sensitive substring; abbreviations like "ICD" keep their
  casing) in the paraphrase;
* synthetic QA pairs -- parsed from generator output in a strict
  two-line ``Q:``/``A:`` format, with malformed pairs discarded and
  counted rather than silently accepted.

Augmented entries are embedded from the rewrite text or the question
text, but their display text is always the parent document's original
passage: pseudo-queries exist to improve matching, and the evidence shown
downstream must stay the source passage itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .datasets import Corpus, Document
from .embedding import EmbedderSpec, embed_batch
from .errors import ValidationError
from .generation import GeneratorSpec, generate
from .index import EntryKind, IndexEntry, VectorIndex


@dataclass(frozen=True)
class AugmentationConfig:
    rewrites_per_doc: int
    qa_pairs_per_doc: int
    rewriter: GeneratorSpec
    preserve_terms: tuple[str, ...] = ()

    def __post_init__(self):
        if self.rewrites_per_doc < 0 or self.qa_pairs_per_doc < 0:
            raise ValidationError("augmentation counts must be >= 0")


@dataclass(frozen=True)
class SyntheticQA:
    question: str
    answer: str
    parent_doc_id: str

    def __post_init__(self):
        if not self.question or not self.answer:
            raise ValidationError(
                f"synthetic QA for doc '{self.parent_doc_id}' has an empty field"
            )


@dataclass
class AugmentationReport:
    """Accepted/discarded counters, accumulated across documents."""

    rewrites_accepted: int = 0
    rewrites_discarded: int = 0
    qa_accepted: int = 0
    qa_discarded: int = 0
    per_doc: dict[str, dict[str, int]] = field(default_factory=dict)

    def _bump(self, doc_id: str, key: str, by: int = 1) -> None:
        setattr(self, key, getattr(self, key) + by)
        doc = self.per_doc.setdefault(
            doc_id,
            {"rewrites_accepted": 0, "rewrites_discarded": 0,
             "qa_accepted": 0, "qa_discarded": 0},
        )
        doc[key] += by

    def to_dict(self) -> dict:
        return {
            "rewrites_accepted": self.rewrites_accepted,
            "rewrites_discarded": self.rewrites_discarded,
            "qa_accepted": self.qa_accepted,
            "qa_discarded": self.qa_discarded,
            "per_doc": self.per_doc,
        }


def rewrite_prompt(doc: Document, variant: int, preserve_terms: tuple[str, ...]) -> str:
    """The fixed prompt sent to the rewriter for paraphrase ``variant``."""
    guard = ""
    if preserve_terms:
        kept = ", ".join(preserve_terms)
        guard = f" Keep these terms exactly as written when they occur: {kept}."
    return (
        f"Paraphrase the following passage, keeping its full meaning.{guard}\n"
        f"Passage: {doc.text}\n"
        f"Paraphrase {variant}:"
    )


def qa_generation_prompt(doc: Document, pairs: int) -> str:
    """The fixed prompt asking for question-answer pairs in Q:/A: lines."""
    return (
        f"Write {pairs} question-answer pairs about the passage below. "
        'Format each pair as two lines: "Q: <question>" then "A: <answer>".\n'
        f"Passage: {doc.text}"
    )


def _terms_to_preserve(doc: Document, config: AugmentationConfig) -> list[str]:
    return [t for t in config.preserve_terms if t in doc.text]


def rewrite_document(
    doc: Document,
    config: AugmentationConfig,
    report: AugmentationReport | None = None,
) -> list[str]:
    """Generate up to ``rewrites_per_doc`` accepted paraphrases of ``doc``.

    A paraphrase is rejected (and counted) if it is blank or drops any
    protected term that the source passage contains. Zero acceptances is
    not an error.
    """
    report = report if report is not None else AugmentationReport()
    required = _terms_to_preserve(doc, config)
    accepted: list[str] = []
    for variant in range(1, config.rewrites_per_doc + 1):
        result = generate(rewrite_prompt(doc, variant, config.preserve_terms), config.rewriter)
        candidate = result.text.strip()
        if candidate and all(term in candidate for term in required):
            accepted.append(candidate)
            report._bump(doc.id, "rewrites_accepted")
        else:
            report._bump(doc.id, "rewrites_discarded")
    return accepted


def parse_qa_pairs(raw: str, parent_doc_id: str) -> tuple[list[SyntheticQA], int]:
    """Parse ``Q:``/``A:`` line pairs; returns (pairs, discarded count).

    A ``Q:`` line must be followed (ignoring blank lines) by an ``A:``
    line, and both payloads must be non-empty; anything else discards the
    attempted pair.
    """
    lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
    pairs: list[SyntheticQA] = []
    discarded = 0
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.startswith("Q:"):
            i += 1
            continue
        question = line[2:].strip()
        if i + 1 < len(lines) and lines[i + 1].startswith("A:"):
            answer = lines[i + 1][2:].strip()
            if question and answer:
                pairs.append(
                    SyntheticQA(question=question, answer=answer, parent_doc_id=parent_doc_id)
                )
            else:
                discarded += 1
            i += 2
        else:
            discarded += 1
            i += 1
    return pairs, discarded


def generate_synthetic_qa(
    doc: Document,
    config: AugmentationConfig,
    report: AugmentationReport | None = None,
) -> list[SyntheticQA]:
    """Ask the generator for QA pairs about ``doc`` and parse strictly."""
    report = report if report is not None else AugmentationReport()
    if config.qa_pairs_per_doc == 0:
        return []
    result = generate(qa_generation_prompt(doc, config.qa_pairs_per_doc), config.rewriter)
    pairs, discarded = parse_qa_pairs(result.text, doc.id)
    pairs = pairs[: config.qa_pairs_per_doc]
    if discarded:
        report._bump(doc.id, "qa_discarded", discarded)
    if pairs:
        report._bump(doc.id, "qa_accepted", len(pairs))
    return pairs


def augment_index(
    index: VectorIndex,
    corpus: Corpus,
    config: AugmentationConfig,
    embedder: EmbedderSpec,
    report: AugmentationReport | None = None,
) -> VectorIndex:
    """Build a new index: all original entries plus accepted augmentations.

    Rewrite entries embed the paraphrase text; synthetic-query entries
    embed the question text. Both display the parent document's original
    text and point back at it, so retrieval evidence is always a source
    passage. Original entries are carried over untouched.
    """
    doc_ids = {doc.id for doc in corpus.documents}
    original_ids = {
        e.entry_id for e in index.entries if e.entry_kind is EntryKind.ORIGINAL
    }
    if original_ids != doc_ids:
        raise ValidationError(
            "index was not built from this corpus "
            f"(corpus has {len(doc_ids)} docs, index originals cover {len(original_ids)})"
        )
    report = report if report is not None else AugmentationReport()

    # (entry_id, text to embed, parent doc, kind), in deterministic order
    staged: list[tuple[str, str, Document, EntryKind]] = []
    for doc in corpus.documents:
        for i, text in enumerate(rewrite_document(doc, config, report), start=1):
            staged.append((f"{doc.id}::rw{i}", text, doc, EntryKind.REWRITE))
        for i, qa in enumerate(generate_synthetic_qa(doc, config, report), start=1):
            staged.append((f"{doc.id}::qa{i}", qa.question, doc, EntryKind.SYNTHETIC_QUERY))

    vectors = embed_batch([text for _, text, _, _ in staged], embedder)
    new_entries = list(index.entries)
    for (entry_id, _text, doc, kind), vector in zip(staged, vectors):
        new_entries.append(
            IndexEntry(
                entry_id=entry_id,
                vector=vector,
                parent_doc_id=doc.id,
                entry_kind=kind,
                display_text=doc.text,
            )
        )
    return VectorIndex(dim=index.dim, entries=new_entries, name=index.name)
