"""Corpus and benchmark dataset loading.

Raw files are turned into canonical in-memory records:

* ``Document`` / ``Corpus`` -- passages to be indexed.
* ``EvalExample`` -- gold-labeled QA items from PubMedQA- or
  2WikiMultihopQA-shaped JSON files.

Canonical records round-trip through a line-delimited JSON format (one
record per line) so loaded data can be cached and reloaded bit-exactly.

Accepted file shapes (documented here so fixtures can be written by hand):

PubMedQA: a single JSON object mapping example id to a record with a
question string (``question`` or ``QUESTION``), a list of context strings
(``contexts`` or ``CONTEXTS``), and a ``final_decision`` label that must be
yes/no/maybe in any casing.

2WikiMultihopQA: a JSON list of records, each with ``_id`` (or ``id``),
``question``, ``answer``, ``type`` (compare/comparison, bridge, inference,
compositional/compose), and ``context``: a list of ``[title, sentences]``
pairs where ``sentences`` is a list of strings.

Corpus: JSON Lines, one document per line:
``{"id": ..., "text": ..., "source": ..., "metadata": {...}}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import LoadError, ValidationError

PUBMEDQA_LABELS = frozenset({"yes", "no", "maybe"})


class DatasetKind(Enum):
    PUBMEDQA = "pubmedqa"
    TWOWIKI = "twowiki"
    OTHER = "other"


class ReasoningType(Enum):
    COMPARE = "compare"
    BRIDGE = "bridge"
    INFERENCE = "inference"
    COMPOSE = "compose"


# Raw "type" strings found in 2WikiMultihopQA files, mapped to our enum.
_TWOWIKI_TYPE_MAP = {
    "compare": ReasoningType.COMPARE,
    "comparison": ReasoningType.COMPARE,
    "bridge": ReasoningType.BRIDGE,
    "inference": ReasoningType.INFERENCE,
    "compositional": ReasoningType.COMPOSE,
    "compose": ReasoningType.COMPOSE,
}


@dataclass(frozen=True)
class Document:
    """One indexable passage."""

    id: str
    text: str
    source: str = ""
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValidationError("document id must be non-empty")
        if not self.text:
            raise ValidationError(f"document '{self.id}' has empty text")


@dataclass(frozen=True)
class EvalExample:
    """A gold-labeled QA item.

    ``reasoning_type`` is present exactly for TwoWikiMultihop examples;
    PubMedQA gold answers are restricted to yes/no/maybe.
    """

    id: str
    question: str
    gold_answers: tuple[str, ...]
    dataset: DatasetKind
    reasoning_type: ReasoningType | None = None
    gold_contexts: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("example id must be non-empty")
        if not self.gold_answers:
            raise ValidationError(f"example '{self.id}' has no gold answers")
        if self.dataset is DatasetKind.TWOWIKI:
            if self.reasoning_type is None:
                raise ValidationError(f"2wiki example '{self.id}' lacks a reasoning type")
        elif self.reasoning_type is not None:
            raise ValidationError(
                f"example '{self.id}': reasoning_type only applies to 2wiki examples"
            )
        if self.dataset is DatasetKind.PUBMEDQA:
            bad = [a for a in self.gold_answers if a not in PUBMEDQA_LABELS]
            if bad:
                raise ValidationError(
                    f"example '{self.id}': gold answers {bad} not in yes/no/maybe"
                )


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of documents with unique ids."""

    documents: tuple[Document, ...]
    name: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise ValidationError(f"corpus '{self.name}': duplicate document id '{doc.id}'")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


def _read_json(path: str | Path):
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path} is not valid JSON: {exc}") from exc


def _pick(record: dict, example_id: str, *keys: str):
    """Return the first present key from ``keys``, else raise naming the miss."""
    for key in keys:
        if key in record:
            return record[key]
    raise LoadError(f"record '{example_id}' is missing key '{keys[0]}'")


def load_pubmedqa(path: str | Path) -> list[EvalExample]:
    """Load a PubMedQA-shaped JSON file into EvalExamples.

    The final-decision label is lowercased and becomes the single gold
    answer; contexts are preserved as gold_contexts. Unknown labels raise
    a ValidationError naming the offending example id.
    """
    data = _read_json(path)
    if not isinstance(data, dict):
        raise LoadError(f"{path}: expected a top-level JSON object mapping id -> record")
    examples = []
    for example_id, record in data.items():
        if not isinstance(record, dict):
            raise LoadError(f"record '{example_id}' is not a JSON object")
        question = _pick(record, example_id, "question", "QUESTION")
        contexts = _pick(record, example_id, "contexts", "CONTEXTS")
        label = _pick(record, example_id, "final_decision")
        if not isinstance(label, str) or label.lower() not in PUBMEDQA_LABELS:
            raise ValidationError(
                f"example '{example_id}': final_decision {label!r} is not yes/no/maybe"
            )
        if not isinstance(contexts, list):
            raise LoadError(f"record '{example_id}': key 'contexts' must be a list")
        examples.append(
            EvalExample(
                id=str(example_id),
                question=str(question),
                gold_answers=(label.lower(),),
                dataset=DatasetKind.PUBMEDQA,
                gold_contexts=tuple(str(c) for c in contexts),
            )
        )
    return examples


def load_twowiki(path: str | Path) -> list[EvalExample]:
    """Load a 2WikiMultihopQA-shaped JSON file into EvalExamples.

    The raw ``type`` field maps onto ReasoningType (``compositional`` ->
    COMPOSE); each ``[title, sentences]`` context is flattened into one
    passage text. Unknown type strings and missing answers are validation
    errors.
    """
    data = _read_json(path)
    if not isinstance(data, list):
        raise LoadError(f"{path}: expected a top-level JSON list of records")
    examples = []
    for i, record in enumerate(data):
        if not isinstance(record, dict):
            raise LoadError(f"record #{i} is not a JSON object")
        example_id = str(record.get("_id") or record.get("id") or f"twowiki-{i}")
        question = _pick(record, example_id, "question")
        answer = record.get("answer")
        if answer is None or (isinstance(answer, str) and not answer):
            raise ValidationError(f"example '{example_id}' has no answer")
        raw_type = _pick(record, example_id, "type")
        reasoning = _TWOWIKI_TYPE_MAP.get(str(raw_type).lower())
        if reasoning is None:
            raise ValidationError(
                f"example '{example_id}': unknown reasoning type {raw_type!r}"
            )
        contexts = []
        for item in record.get("context", []):
            try:
                _title, sentences = item
            except (TypeError, ValueError) as exc:
                raise LoadError(
                    f"example '{example_id}': context entries must be [title, sentences]"
                ) from exc
            contexts.append(" ".join(str(s) for s in sentences))
        examples.append(
            EvalExample(
                id=example_id,
                question=str(question),
                gold_answers=(str(answer).lower(),),
                dataset=DatasetKind.TWOWIKI,
                reasoning_type=reasoning,
                gold_contexts=tuple(contexts) if contexts else None,
            )
        )
    return examples


def sample_examples(examples: list[EvalExample], n: int, seed: int) -> list[EvalExample]:
    """Draw a deterministic random subset of exactly ``n`` examples.

    Uses a seeded pseudo-random permutation (numpy RandomState, which is
    frozen across numpy versions) so the same (examples, n, seed) always
    yields the same subset.
    """
    if n < 0:
        raise ValidationError("sample size must be >= 0")
    if n > len(examples):
        raise ValidationError(f"cannot sample {n} from {len(examples)} examples")
    order = np.random.RandomState(seed).permutation(len(examples))
    return [examples[i] for i in order[:n]]


# ---------------------------------------------------------------------------
# Canonical JSONL serialization (caching format)
# ---------------------------------------------------------------------------

def example_to_dict(ex: EvalExample) -> dict:
    return {
        "id": ex.id,
        "question": ex.question,
        "gold_answers": list(ex.gold_answers),
        "dataset": ex.dataset.value,
        "reasoning_type": ex.reasoning_type.value if ex.reasoning_type else None,
        "gold_contexts": list(ex.gold_contexts) if ex.gold_contexts is not None else None,
    }


def example_from_dict(d: dict) -> EvalExample:
    try:
        return EvalExample(
            id=d["id"],
            question=d["question"],
            gold_answers=tuple(d["gold_answers"]),
            dataset=DatasetKind(d["dataset"]),
            reasoning_type=ReasoningType(d["reasoning_type"]) if d.get("reasoning_type") else None,
            gold_contexts=tuple(d["gold_contexts"]) if d.get("gold_contexts") is not None else None,
        )
    except (KeyError, ValueError) as exc:
        raise LoadError(f"malformed cached example record: {exc}") from exc


def document_to_dict(doc: Document) -> dict:
    return {"id": doc.id, "text": doc.text, "source": doc.source, "metadata": dict(doc.metadata)}


def document_from_dict(d: dict) -> Document:
    try:
        return Document(
            id=d["id"],
            text=d["text"],
            source=d.get("source", ""),
            metadata=dict(d.get("metadata", {})),
        )
    except KeyError as exc:
        raise LoadError(f"document record is missing key {exc}") from exc


def save_examples_jsonl(examples: list[EvalExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(example_to_dict(ex), sort_keys=True, ensure_ascii=False) + "\n")


def load_examples_jsonl(path: str | Path) -> list[EvalExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"{path}:{line_no}: bad JSON line: {exc}") from exc
            examples.append(example_from_dict(record))
    return examples


def load_corpus_jsonl(path: str | Path, name: str = "") -> Corpus:
    """Load a JSONL corpus file (one document object per line)."""
    docs = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"{path}:{line_no}: bad JSON line: {exc}") from exc
            docs.append(document_from_dict(record))
    return Corpus(documents=tuple(docs), name=name or Path(path).stem)


def save_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in corpus.documents:
            f.write(json.dumps(document_to_dict(doc), sort_keys=True, ensure_ascii=False) + "\n")
