"""Metric arithmetic: normalization, EM/F1, aggregation, report diffs."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ragpipes import (
    DatasetKind,
    EvalExample,
    MetricsReport,
    ReasoningType,
    ScoredExample,
    ValidationError,
    aggregate,
    compare_reports,
    exact_match,
    normalize_answer,
    score_run,
    token_f1,
)
from ragpipes.pipelines import PipelineTrace


# ---------------------------------------------------------------------------
# normalize_answer
# ---------------------------------------------------------------------------

def test_normalize_rules():
    assert normalize_answer("The Eiffel Tower.") == "eiffel tower"
    assert normalize_answer("YES") == "yes"
    assert normalize_answer("  a  b ") == "b"  # single-letter article removed too


@given(st.text(max_size=80))
def test_normalize_idempotent(s):
    assert normalize_answer(normalize_answer(s)) == normalize_answer(s)


# ---------------------------------------------------------------------------
# exact_match / token_f1
# ---------------------------------------------------------------------------

def test_exact_match_basics():
    assert exact_match("yes", ["yes"]) == 1
    assert exact_match("Yes.", ["yes"]) == 1
    assert exact_match("maybe", ["yes"]) == 0
    assert exact_match("obama", ["Barack Obama", "Obama"]) == 1


def test_token_f1_hand_computed_overlap():
    # precision 1/2, recall 1 -> harmonic mean 2/3
    assert token_f1("barack obama", ["obama"]) == pytest.approx(2 / 3, abs=1e-9)


def test_token_f1_identity():
    assert token_f1("the full answer", ["full answer the"]) == 1.0
    assert token_f1("exact phrase", ["exact phrase"]) == 1.0


def test_token_f1_empty_cases():
    assert token_f1("the a an", ["the"]) == 1.0   # both normalize to empty
    assert token_f1("", ["something"]) == 0.0
    assert token_f1("something", ["the"]) == 0.0


def test_single_token_f1_equals_em():
    cases = [("yes", "yes"), ("yes", "no"), ("maybe", "maybe"), ("no", "maybe")]
    for pred, gold in cases:
        assert token_f1(pred, [gold]) == float(exact_match(pred, [gold]))


def test_label_set_em_equals_f1_pointwise():
    labels = ["yes", "no", "maybe"]
    for pred in labels:
        for gold in labels:
            assert float(exact_match(pred, [gold])) == token_f1(pred, [gold])


def test_f1_symmetric_for_single_gold():
    pairs = [("barack obama", "obama"), ("a b c", "c d"), ("x", "y z")]
    for s1, s2 in pairs:
        assert token_f1(s1, [s2]) == pytest.approx(token_f1(s2, [s1]), abs=1e-12)


_texts = st.text(alphabet="abc yes no", min_size=0, max_size=30)


@given(_texts, _texts)
def test_em_implies_f1_one(pred, gold):
    if exact_match(pred, [gold]) == 1:
        assert token_f1(pred, [gold]) == 1.0


def test_metrics_require_golds():
    with pytest.raises(ValidationError):
        exact_match("x", [])
    with pytest.raises(ValidationError):
        token_f1("x", [])


# ---------------------------------------------------------------------------
# score_run
# ---------------------------------------------------------------------------

def _pair(ex_id, question, gold, answer=None, error=None, rtype=None):
    dataset = DatasetKind.TWOWIKI if rtype else DatasetKind.OTHER
    example = EvalExample(id=ex_id, question=question, gold_answers=(gold,),
                          dataset=dataset, reasoning_type=rtype)
    trace = PipelineTrace(question=question, final_answer=answer or "",
                          example_id=ex_id, error=error)
    return example, trace


def test_score_run_all_correct():
    pairs = [_pair(f"e{i}", "q?", "yes", answer="yes") for i in range(4)]
    scored = score_run(pairs)
    assert all(s.em == 1 and s.f1 == 1.0 for s in scored)


def test_score_run_counts_errors_separately():
    pairs = [_pair(f"e{i}", "q?", "yes", answer="yes") for i in range(3)]
    pairs.append(_pair("e3", "q?", "yes", error="stage 'generate' failed"))
    scored = score_run(pairs)
    assert len(scored) == 4
    errored = [s for s in scored if s.errored]
    assert len(errored) == 1
    assert errored[0].em == 0 and errored[0].f1 == 0.0


def test_score_run_mixed_against_spreadsheet_oracle():
    # Hand-tabulated: em = [1, 0, 1, 0], f1 = [1, 2/3, 1, 0]; means 0.5 and 2/3.
    pairs = [
        _pair("e0", "q?", "paris", answer="Paris."),
        _pair("e1", "q?", "obama", answer="barack obama"),
        _pair("e2", "q?", "the rhine", answer="rhine"),
        _pair("e3", "q?", "london", answer="madrid"),
    ]
    scored = score_run(pairs)
    assert [s.em for s in scored] == [1, 0, 1, 0]
    assert scored[1].f1 == pytest.approx(2 / 3, abs=1e-9)
    mean_em = sum(s.em for s in scored) / 4
    mean_f1 = sum(s.f1 for s in scored) / 4
    assert mean_em == pytest.approx(0.5, abs=1e-12)
    assert mean_f1 == pytest.approx((1 + 2 / 3 + 1 + 0) / 4, abs=1e-12)


# ---------------------------------------------------------------------------
# aggregate
# ---------------------------------------------------------------------------

def _scored(em_values, rtype=None):
    return [
        ScoredExample(example_id=f"s{i}", prediction="p", em=em, f1=float(em),
                      reasoning_type=rtype)
        for i, em in enumerate(em_values)
    ]


def test_aggregate_98_of_105():
    scored = _scored([1] * 98 + [0] * 7)
    report = aggregate(scored, DatasetKind.PUBMEDQA)
    assert report.n == 105
    assert report.em_pct == pytest.approx(93.33, abs=0.01)
    assert report.f1_pct == pytest.approx(93.33, abs=0.01)


def test_aggregate_per_type_micro_total():
    scored = (
        [ScoredExample(example_id="c1", prediction="p", em=1, f1=1.0,
                       reasoning_type=ReasoningType.COMPARE),
         ScoredExample(example_id="c2", prediction="p", em=0, f1=0.0,
                       reasoning_type=ReasoningType.COMPARE),
         ScoredExample(example_id="b1", prediction="p", em=1, f1=1.0,
                       reasoning_type=ReasoningType.BRIDGE),
         ScoredExample(example_id="b2", prediction="p", em=1, f1=1.0,
                       reasoning_type=ReasoningType.BRIDGE)]
    )
    report = aggregate(scored, DatasetKind.TWOWIKI)
    assert report.per_type["compare"].f1_pct == pytest.approx(50.0, abs=1e-9)
    assert report.per_type["bridge"].f1_pct == pytest.approx(100.0, abs=1e-9)
    assert report.total_pct == pytest.approx(75.0, abs=1e-9)


def test_aggregate_single_type_total_equals_type_score():
    scored = _scored([1, 0, 1], rtype=ReasoningType.INFERENCE)
    report = aggregate(scored, DatasetKind.TWOWIKI)
    assert report.total_pct == pytest.approx(report.per_type["inference"].f1_pct, abs=1e-12)


def test_aggregate_micro_average_identity_random():
    import random
    rng = random.Random(0)
    for _ in range(50):
        scored = []
        for i in range(rng.randint(1, 60)):
            em = rng.randint(0, 1)
            scored.append(ScoredExample(
                example_id=f"s{i}", prediction="p", em=em, f1=float(em),
                reasoning_type=rng.choice(list(ReasoningType)),
            ))
        report = aggregate(scored, DatasetKind.TWOWIKI)
        weighted = sum(t.n * t.f1_pct for t in report.per_type.values())
        assert report.total_pct == pytest.approx(weighted / report.n, abs=1e-9)


def test_aggregate_empty_input_flagged_undefined():
    report = aggregate([], DatasetKind.PUBMEDQA)
    assert report.n == 0
    assert report.em_pct is None and report.f1_pct is None


def test_scored_example_invariant():
    with pytest.raises(ValidationError):
        ScoredExample(example_id="x", prediction="p", em=1, f1=0.5)


def test_report_roundtrip():
    scored = _scored([1, 0, 1], rtype=ReasoningType.COMPOSE)
    report = aggregate(scored, DatasetKind.TWOWIKI)
    assert MetricsReport.from_dict(report.to_dict()) == report


# ---------------------------------------------------------------------------
# compare_reports
# ---------------------------------------------------------------------------

def _report(f1_pct, dataset=DatasetKind.PUBMEDQA, total=None):
    return MetricsReport(dataset=dataset, n=105, em_pct=f1_pct, f1_pct=f1_pct,
                         total_pct=total)


def test_compare_headline_delta():
    diff = compare_reports(_report(93.33), _report(82.86))
    row = diff.row("f1_pct")
    assert row.absolute == pytest.approx(10.47, abs=1e-9)
    assert row.relative_pct == pytest.approx(12.64, abs=5e-3)


def test_compare_identical_reports():
    diff = compare_reports(_report(88.57), _report(88.57))
    assert all(r.absolute == 0.0 for r in diff.rows)
    assert all(r.ratio == 1.0 for r in diff.rows)


def test_compare_total_nearly_doubles():
    a = _report(33.44, dataset=DatasetKind.TWOWIKI, total=33.44)
    b = _report(17.83, dataset=DatasetKind.TWOWIKI, total=17.83)
    row = compare_reports(a, b).row("total_pct")
    assert row.absolute == pytest.approx(15.61, abs=1e-9)
    assert row.ratio == pytest.approx(1.876, abs=1e-3)


def test_compare_dataset_mismatch():
    with pytest.raises(ValidationError):
        compare_reports(_report(50.0), _report(50.0, dataset=DatasetKind.TWOWIKI))


def test_compare_renders_table():
    table = compare_reports(_report(93.33), _report(82.86)).render()
    assert "f1_pct" in table and "10.47" in table
