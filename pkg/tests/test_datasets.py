"""Loader, sampling, and round-trip tests for canonical dataset records."""

from __future__ import annotations

import json

import pytest

from ragpipes import (
    Corpus,
    DatasetKind,
    Document,
    EvalExample,
    LoadError,
    ReasoningType,
    ValidationError,
    load_pubmedqa,
    load_twowiki,
    sample_examples,
)
from ragpipes.datasets import (
    load_corpus_jsonl,
    load_examples_jsonl,
    save_corpus_jsonl,
    save_examples_jsonl,
)


def _write_json(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# PubMedQA loader
# ---------------------------------------------------------------------------

def test_pubmedqa_minimal_record(tmp_path):
    path = _write_json(tmp_path, "pm.json", {
        "q1": {"question": "Is X effective?", "final_decision": "yes", "contexts": ["ctx"]},
    })
    examples = load_pubmedqa(path)
    assert len(examples) == 1
    assert examples[0].id == "q1"
    assert examples[0].gold_answers == ("yes",)
    assert examples[0].gold_contexts == ("ctx",)
    assert examples[0].dataset is DatasetKind.PUBMEDQA
    assert examples[0].reasoning_type is None


def test_pubmedqa_label_case_normalized(tmp_path):
    path = _write_json(tmp_path, "pm.json", {
        "q1": {"question": "Q?", "final_decision": "Yes", "contexts": []},
    })
    assert load_pubmedqa(path)[0].gold_answers == ("yes",)


def test_pubmedqa_empty_object(tmp_path):
    assert load_pubmedqa(_write_json(tmp_path, "pm.json", {})) == []


def test_pubmedqa_uppercase_keys(tmp_path):
    path = _write_json(tmp_path, "pm.json", {
        "12345": {"QUESTION": "Q?", "CONTEXTS": ["a", "b"], "final_decision": "maybe"},
    })
    ex = load_pubmedqa(path)[0]
    assert ex.question == "Q?"
    assert ex.gold_contexts == ("a", "b")


def test_pubmedqa_unknown_label_names_example(tmp_path):
    path = _write_json(tmp_path, "pm.json", {
        "q9": {"question": "Q?", "final_decision": "probably", "contexts": []},
    })
    with pytest.raises(ValidationError, match="q9"):
        load_pubmedqa(path)


def test_pubmedqa_missing_key_named(tmp_path):
    path = _write_json(tmp_path, "pm.json", {"q1": {"final_decision": "yes", "contexts": []}})
    with pytest.raises(LoadError, match="question"):
        load_pubmedqa(path)


def test_pubmedqa_not_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(LoadError):
        load_pubmedqa(path)


# ---------------------------------------------------------------------------
# 2WikiMultihopQA loader
# ---------------------------------------------------------------------------

def _twowiki_record(rtype="comparison", answer="Paris", rid="w1"):
    return {
        "_id": rid,
        "question": "Which is older?",
        "answer": answer,
        "type": rtype,
        "context": [["Title A", ["Sentence one.", "Sentence two."]]],
    }


@pytest.mark.parametrize("raw,expected", [
    ("comparison", ReasoningType.COMPARE),
    ("compare", ReasoningType.COMPARE),
    ("bridge", ReasoningType.BRIDGE),
    ("inference", ReasoningType.INFERENCE),
    ("compositional", ReasoningType.COMPOSE),
    ("compose", ReasoningType.COMPOSE),
])
def test_twowiki_type_mapping(tmp_path, raw, expected):
    path = _write_json(tmp_path, "tw.json", [_twowiki_record(rtype=raw)])
    assert load_twowiki(path)[0].reasoning_type is expected


def test_twowiki_contexts_flattened(tmp_path):
    path = _write_json(tmp_path, "tw.json", [_twowiki_record()])
    assert load_twowiki(path)[0].gold_contexts == ("Sentence one. Sentence two.",)


def test_twowiki_order_preserved(tmp_path):
    records = [_twowiki_record(rid=f"w{i}") for i in range(3)]
    path = _write_json(tmp_path, "tw.json", records)
    assert [ex.id for ex in load_twowiki(path)] == ["w0", "w1", "w2"]


def test_twowiki_unknown_type(tmp_path):
    path = _write_json(tmp_path, "tw.json", [_twowiki_record(rtype="telepathy")])
    with pytest.raises(ValidationError, match="telepathy"):
        load_twowiki(path)


def test_twowiki_missing_answer(tmp_path):
    record = _twowiki_record()
    del record["answer"]
    path = _write_json(tmp_path, "tw.json", [record])
    with pytest.raises(ValidationError, match="answer"):
        load_twowiki(path)


# ---------------------------------------------------------------------------
# Record invariants
# ---------------------------------------------------------------------------

def test_document_invariants():
    with pytest.raises(ValidationError):
        Document(id="", text="x")
    with pytest.raises(ValidationError):
        Document(id="d", text="")


def test_corpus_rejects_duplicate_ids():
    docs = (Document(id="d", text="a"), Document(id="d", text="b"))
    with pytest.raises(ValidationError, match="duplicate"):
        Corpus(documents=docs)


def test_reasoning_type_iff_twowiki():
    with pytest.raises(ValidationError):
        EvalExample(id="x", question="q", gold_answers=("a",), dataset=DatasetKind.TWOWIKI)
    with pytest.raises(ValidationError):
        EvalExample(
            id="x", question="q", gold_answers=("yes",),
            dataset=DatasetKind.PUBMEDQA, reasoning_type=ReasoningType.BRIDGE,
        )


def test_pubmedqa_gold_label_set_enforced():
    with pytest.raises(ValidationError):
        EvalExample(id="x", question="q", gold_answers=("sure",), dataset=DatasetKind.PUBMEDQA)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _examples(n):
    return [
        EvalExample(id=f"e{i}", question=f"q{i}", gold_answers=("a",), dataset=DatasetKind.OTHER)
        for i in range(n)
    ]


def test_sample_full():
    examples = _examples(10)
    assert sorted(ex.id for ex in sample_examples(examples, 10, seed=1)) == sorted(
        ex.id for ex in examples
    )


def test_sample_deterministic():
    examples = _examples(10)
    first = sample_examples(examples, 3, seed=7)
    second = sample_examples(examples, 3, seed=7)
    assert [ex.id for ex in first] == [ex.id for ex in second]


def test_sample_known_draws():
    # Frozen draws of the seeded permutation: seed 7 -> [8, 5, 0], seed 8 -> [8, 6, 9].
    examples = _examples(10)
    assert [ex.id for ex in sample_examples(examples, 3, seed=7)] == ["e8", "e5", "e0"]
    assert [ex.id for ex in sample_examples(examples, 3, seed=8)] == ["e8", "e6", "e9"]
    for seed in (7, 8):
        draw = sample_examples(examples, 3, seed=seed)
        assert len(draw) == 3
        assert len({ex.id for ex in draw}) == 3
        assert {ex.id for ex in draw} <= {ex.id for ex in examples}


def test_sample_bounds():
    with pytest.raises(ValidationError):
        sample_examples(_examples(3), 4, seed=0)


# ---------------------------------------------------------------------------
# JSONL round-trips
# ---------------------------------------------------------------------------

def test_examples_roundtrip(tmp_path):
    examples = [
        EvalExample(
            id="w1", question="q", gold_answers=("paris",),
            dataset=DatasetKind.TWOWIKI, reasoning_type=ReasoningType.COMPARE,
            gold_contexts=("c1", "c2"),
        ),
        EvalExample(id="p1", question="q2", gold_answers=("no",), dataset=DatasetKind.PUBMEDQA),
    ]
    path = tmp_path / "cache.jsonl"
    save_examples_jsonl(examples, path)
    assert load_examples_jsonl(path) == examples


def test_corpus_roundtrip(tmp_path):
    corpus = Corpus(
        documents=(
            Document(id="d1", text="alpha", source="s", metadata={"k": "v"}),
            Document(id="d2", text="beta"),
        ),
        name="toy",
    )
    path = tmp_path / "corpus.jsonl"
    save_corpus_jsonl(corpus, path)
    reloaded = load_corpus_jsonl(path, name="toy")
    assert reloaded.documents == corpus.documents


def test_loader_roundtrip_via_cache(tmp_path):
    path = _write_json(tmp_path, "pm.json", {
        "q1": {"question": "Q1?", "final_decision": "yes", "contexts": ["c"]},
        "q2": {"question": "Q2?", "final_decision": "NO", "contexts": []},
    })
    loaded = load_pubmedqa(path)
    cache = tmp_path / "cache.jsonl"
    save_examples_jsonl(loaded, cache)
    assert load_examples_jsonl(cache) == loaded
