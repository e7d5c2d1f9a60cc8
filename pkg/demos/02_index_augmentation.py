"""Walkthrough: growing an index with rewrites and synthetic pseudo-queries.

Every augmented entry is embedded from its paraphrase or question text but
displays the parent passage, so retrieval evidence is always a source
document. Protected terms must survive each paraphrase verbatim or the
rewrite is discarded.
"""

import json
from pathlib import Path

import ragpipes
from ragpipes import (
    AugmentationConfig,
    AugmentationReport,
    EmbedderKind,
    EmbedderSpec,
    EntryKind,
    GeneratorKind,
    GeneratorSpec,
    augment_index,
    build_index,
    embed,
    retrieve_top_k,
)
from ragpipes.augmentation import generate_synthetic_qa
from ragpipes.datasets import load_corpus_jsonl

FIXTURES = Path(ragpipes.__file__).parent / "fixtures"
embedder = EmbedderSpec(kind=EmbedderKind.DETERMINISTIC_TEST, dim=48)

corpus = load_corpus_jsonl(FIXTURES / "corpus.jsonl", name="toy")
base = build_index(corpus, embedder)

# The bundled script stands in for a live paraphrasing model.
script = json.loads((FIXTURES / "stub_script.json").read_text())["responses"]
rewriter = GeneratorSpec(kind=GeneratorKind.STUB_SCRIPTED, script=script)
config = AugmentationConfig(
    rewrites_per_doc=1,
    qa_pairs_per_doc=1,
    rewriter=rewriter,
    preserve_terms=("Metformin", "HbA1c", "ICD-10"),
)

report = AugmentationReport()
augmented = augment_index(base, corpus, config, embedder, report)
print(f"entries: {len(base)} original -> {len(augmented)} augmented")
print(f"  rewrites accepted {report.rewrites_accepted}, "
      f"discarded {report.rewrites_discarded} (a paraphrase dropped 'ICD-10')")
print(f"  QA pairs accepted {report.qa_accepted}")
print(f"  kinds: {augmented.count_by_kind(EntryKind.ORIGINAL)} original, "
      f"{augmented.count_by_kind(EntryKind.REWRITE)} rewrite, "
      f"{augmented.count_by_kind(EntryKind.SYNTHETIC_QUERY)} synthetic query")

# Pseudo-queries make unusual phrasings retrievable: ask each synthetic
# question against both indexes and compare top-1 accuracy.
pseudo = []
for doc in corpus.documents:
    for qa in generate_synthetic_qa(doc, config):
        pseudo.append((qa.question, doc.id))

def top1(index):
    return sum(
        retrieve_top_k(index, embed(q, embedder), 1)[0].entry.parent_doc_id == parent
        for q, parent in pseudo
    )

print(f"\ntop-1 accuracy over {len(pseudo)} pseudo-query phrasings:")
print(f"  unaugmented index: {top1(base)}/{len(pseudo)}")
print(f"  augmented index:   {top1(augmented)}/{len(pseudo)}")

question, parent = pseudo[0]
hit = retrieve_top_k(augmented, embed(question, embedder), 1)[0]
print(f"\n'{question}'")
print(f"  -> [{hit.entry.entry_id}] score {hit.score:.4f}, evidence shown is the")
print(f"     parent passage: {hit.entry.display_text!r}")
