"""Rewrite acceptance, QA parsing, and augmented-index structure."""

from __future__ import annotations

import pytest

from ragpipes import (
    AugmentationConfig,
    AugmentationReport,
    Corpus,
    Document,
    EmbedderKind,
    EmbedderSpec,
    EntryKind,
    GeneratorKind,
    GeneratorSpec,
    ValidationError,
    augment_index,
    build_index,
    embed,
    generate_synthetic_qa,
    retrieve_top_k,
    rewrite_document,
)
from ragpipes.augmentation import parse_qa_pairs, qa_generation_prompt, rewrite_prompt
from ragpipes.generation import prompt_fingerprint

DET16 = EmbedderSpec(kind=EmbedderKind.DETERMINISTIC_TEST, dim=16)

DOC = Document(id="d1", text="Metformin lowers blood glucose in type 2 diabetes.")
DOC2 = Document(id="d2", text="The Rhine flows through Basel and Cologne.")
CORPUS = Corpus(documents=(DOC, DOC2), name="toy")


def scripted(mapping, default=None):
    return GeneratorSpec(kind=GeneratorKind.STUB_SCRIPTED, script=mapping,
                         script_default=default)


def config_for(rewrites=0, qa=0, generator=None, preserve=()):
    return AugmentationConfig(
        rewrites_per_doc=rewrites,
        qa_pairs_per_doc=qa,
        rewriter=generator or scripted({}, default=""),
        preserve_terms=tuple(preserve),
    )


def script_rewrites(doc, texts, preserve=()):
    """Map each rewrite prompt for ``doc`` onto a canned paraphrase."""
    return {
        prompt_fingerprint(rewrite_prompt(doc, i, tuple(preserve))): text
        for i, text in enumerate(texts, start=1)
    }


# ---------------------------------------------------------------------------
# rewrite_document
# ---------------------------------------------------------------------------

def test_rewrites_disabled():
    assert rewrite_document(DOC, config_for(rewrites=0)) == []


def test_echo_rewrite_accepted():
    # An echoed passage trivially preserves every protected term.
    mapping = script_rewrites(DOC, [DOC.text], preserve=["Metformin"])
    config = config_for(rewrites=1, generator=scripted(mapping), preserve=["Metformin"])
    report = AugmentationReport()
    assert rewrite_document(DOC, config, report) == [DOC.text]
    assert report.rewrites_accepted == 1
    assert report.rewrites_discarded == 0


def test_rewrite_dropping_protected_term_rejected():
    mapping = script_rewrites(
        DOC,
        ["Metformin reduces sugar levels.", "This drug reduces sugar levels."],
        preserve=["Metformin"],
    )
    config = config_for(rewrites=2, generator=scripted(mapping), preserve=["Metformin"])
    report = AugmentationReport()
    accepted = rewrite_document(DOC, config, report)
    assert accepted == ["Metformin reduces sugar levels."]
    assert report.rewrites_discarded == 1


def test_protected_term_matching_is_case_sensitive():
    mapping = script_rewrites(DOC, ["metformin lowers glucose."], preserve=["Metformin"])
    config = config_for(rewrites=1, generator=scripted(mapping), preserve=["Metformin"])
    assert rewrite_document(DOC, config) == []


def test_terms_absent_from_source_not_required():
    mapping = script_rewrites(DOC2, ["The Rhine passes Basel."], preserve=["Metformin"])
    config = config_for(rewrites=1, generator=scripted(mapping), preserve=["Metformin"])
    assert rewrite_document(DOC2, config) == ["The Rhine passes Basel."]


def test_zero_accepted_rewrites_is_not_an_error():
    config = config_for(rewrites=2, generator=scripted({}, default=""))
    report = AugmentationReport()
    assert rewrite_document(DOC, config, report) == []
    assert report.rewrites_discarded == 2


# ---------------------------------------------------------------------------
# synthetic QA parsing
# ---------------------------------------------------------------------------

def test_qa_disabled():
    assert generate_synthetic_qa(DOC, config_for(qa=0)) == []


def test_qa_happy_path():
    raw = "Q: What does metformin lower?\nA: Blood glucose"
    mapping = {prompt_fingerprint(qa_generation_prompt(DOC, 1)): raw}
    config = config_for(qa=1, generator=scripted(mapping))
    pairs = generate_synthetic_qa(DOC, config)
    assert len(pairs) == 1
    assert pairs[0].question == "What does metformin lower?"
    assert pairs[0].answer == "Blood glucose"
    assert pairs[0].parent_doc_id == "d1"


def test_qa_missing_answer_line_discarded():
    raw = "Q: What does metformin lower?\nnot an answer line"
    mapping = {prompt_fingerprint(qa_generation_prompt(DOC, 1)): raw}
    report = AugmentationReport()
    pairs = generate_synthetic_qa(DOC, config_for(qa=1, generator=scripted(mapping)), report)
    assert pairs == []
    assert report.qa_discarded == 1


def test_parse_qa_pairs_mixed():
    raw = (
        "Q: First?\nA: One\n"
        "chatter in between\n"
        "Q: Second?\nA: Two\n"
        "Q: Broken pair\n"
        "Q: Empty answer?\nA:\n"
    )
    pairs, discarded = parse_qa_pairs(raw, "d")
    assert [(p.question, p.answer) for p in pairs] == [("First?", "One"), ("Second?", "Two")]
    assert discarded == 2


def test_qa_caps_at_configured_count():
    raw = "Q: one?\nA: 1\nQ: two?\nA: 2\nQ: three?\nA: 3"
    mapping = {prompt_fingerprint(qa_generation_prompt(DOC, 2)): raw}
    pairs = generate_synthetic_qa(DOC, config_for(qa=2, generator=scripted(mapping)))
    assert len(pairs) == 2


# ---------------------------------------------------------------------------
# augment_index
# ---------------------------------------------------------------------------

def full_script(preserve=()):
    """Scripted responses: one rewrite and one QA pair per corpus doc."""
    mapping = {}
    mapping.update(script_rewrites(
        DOC, ["Metformin brings down blood sugar in diabetes."], preserve))
    mapping.update(script_rewrites(
        DOC2, ["Basel and Cologne both lie on the Rhine."], preserve))
    mapping[prompt_fingerprint(qa_generation_prompt(DOC, 1))] = (
        "Q: Which drug lowers blood glucose?\nA: Metformin"
    )
    mapping[prompt_fingerprint(qa_generation_prompt(DOC2, 1))] = (
        "Q: Which river passes Basel?\nA: The Rhine"
    )
    return mapping


def test_augment_identity_when_disabled():
    index = build_index(CORPUS, DET16)
    out = augment_index(index, CORPUS, config_for(), DET16)
    assert len(out) == len(index)
    assert [e.entry_id for e in out.entries] == [e.entry_id for e in index.entries]


def test_augment_cardinality():
    index = build_index(CORPUS, DET16)
    config = config_for(rewrites=1, qa=1, generator=scripted(full_script()))
    out = augment_index(index, CORPUS, config, DET16)
    assert len(out) == 6  # 2 originals + 2 rewrites + 2 pseudo-queries
    assert out.count_by_kind(EntryKind.ORIGINAL) == 2
    assert out.count_by_kind(EntryKind.REWRITE) == 2
    assert out.count_by_kind(EntryKind.SYNTHETIC_QUERY) == 2


def test_augment_preserves_originals():
    index = build_index(CORPUS, DET16)
    config = config_for(rewrites=1, qa=1, generator=scripted(full_script()))
    out = augment_index(index, CORPUS, config, DET16)
    originals = [e for e in out.entries if e.entry_kind is EntryKind.ORIGINAL]
    assert originals == list(index.entries)


def test_augmented_entries_display_parent_text():
    index = build_index(CORPUS, DET16)
    config = config_for(rewrites=1, qa=1, generator=scripted(full_script()))
    out = augment_index(index, CORPUS, config, DET16)
    by_id = {doc.id: doc.text for doc in CORPUS.documents}
    for entry in out.entries:
        if entry.entry_kind is not EntryKind.ORIGINAL:
            assert entry.display_text == by_id[entry.parent_doc_id]


def test_pseudo_query_retrieves_parent_at_rank_one():
    index = build_index(CORPUS, DET16)
    config = config_for(rewrites=0, qa=1, generator=scripted(full_script()))
    out = augment_index(index, CORPUS, config, DET16)
    query = embed("Which drug lowers blood glucose?", DET16)
    hits = retrieve_top_k(out, query, 1, dedupe_parents=True)
    assert hits[0].entry.parent_doc_id == "d1"
    assert hits[0].entry.display_text == DOC.text
    assert hits[0].score == pytest.approx(1.0, abs=1e-9)


def test_augment_rejects_foreign_index():
    other = Corpus(documents=(Document(id="zz", text="unrelated"),), name="other")
    foreign = build_index(other, DET16)
    with pytest.raises(ValidationError, match="not built from"):
        augment_index(foreign, CORPUS, config_for(), DET16)


def test_augment_report_counts():
    index = build_index(CORPUS, DET16)
    config = config_for(rewrites=1, qa=1, generator=scripted(full_script()))
    report = AugmentationReport()
    augment_index(index, CORPUS, config, DET16, report)
    assert report.rewrites_accepted == 2
    assert report.qa_accepted == 2
    assert report.to_dict()["per_doc"]["d1"]["qa_accepted"] == 1
