"""Scoring and aggregation for QA runs.

Answer normalization follows the standard extractive-QA convention:
lowercase, strip punctuation, drop English articles, collapse whitespace.
Exact match and token F1 are computed against every gold answer, taking
the best. For single-token label answers (yes/no/maybe) the two metrics
coincide.

``aggregate`` produces overall EM/F1 percentages and, for multi-hop
datasets, a per-reasoning-type breakdown whose Total is the micro
average: the mean over all examples, equal to the example-count-weighted
mean of per-type scores (``total_method`` = "micro", ``total_metric``
labels which column the Total tracks). Error traces score 0/0 and stay in
the denominator; excluding failures would silently inflate scores.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass

from .datasets import DatasetKind, EvalExample, ReasoningType
from .errors import ValidationError
from .pipelines import PipelineTrace

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


def normalize_answer(s: str) -> str:
    """Lowercase, strip punctuation, remove articles, collapse whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def exact_match(pred: str, golds: list[str] | tuple[str, ...]) -> int:
    """1 iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise ValidationError("exact_match needs at least one gold answer")
    norm_pred = normalize_answer(pred)
    return int(any(norm_pred == normalize_answer(g) for g in golds))


def _f1_single(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(pred: str, golds: list[str] | tuple[str, ...]) -> float:
    """Best token-level F1 over the gold answers (multiset overlap)."""
    if not golds:
        raise ValidationError("token_f1 needs at least one gold answer")
    pred_tokens = normalize_answer(pred).split()
    return max(_f1_single(pred_tokens, normalize_answer(g).split()) for g in golds)


@dataclass(frozen=True)
class ScoredExample:
    example_id: str
    prediction: str
    em: int
    f1: float
    reasoning_type: ReasoningType | None = None
    errored: bool = False

    def __post_init__(self):
        if self.em not in (0, 1):
            raise ValidationError("em must be 0 or 1")
        if not 0.0 <= self.f1 <= 1.0:
            raise ValidationError("f1 must lie in [0, 1]")
        if self.em == 1 and self.f1 != 1.0:
            raise ValidationError("em = 1 forces f1 = 1")


@dataclass(frozen=True)
class TypeScore:
    n: int
    em_pct: float
    f1_pct: float


@dataclass(frozen=True)
class MetricsReport:
    dataset: DatasetKind
    n: int
    em_pct: float | None
    f1_pct: float | None
    per_type: dict[str, TypeScore] | None = None
    total_pct: float | None = None
    total_metric: str = "f1"
    total_method: str = "micro"
    errors: int = 0

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.value,
            "n": self.n,
            "em_pct": self.em_pct,
            "f1_pct": self.f1_pct,
            "per_type": {
                t: {"n": s.n, "em_pct": s.em_pct, "f1_pct": s.f1_pct}
                for t, s in self.per_type.items()
            }
            if self.per_type is not None
            else None,
            "total_pct": self.total_pct,
            "total_metric": self.total_metric,
            "total_method": self.total_method,
            "errors": self.errors,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        per_type = None
        if d.get("per_type") is not None:
            per_type = {
                t: TypeScore(n=s["n"], em_pct=s["em_pct"], f1_pct=s["f1_pct"])
                for t, s in d["per_type"].items()
            }
        return cls(
            dataset=DatasetKind(d["dataset"]),
            n=d["n"],
            em_pct=d["em_pct"],
            f1_pct=d["f1_pct"],
            per_type=per_type,
            total_pct=d.get("total_pct"),
            total_metric=d.get("total_metric", "f1"),
            total_method=d.get("total_method", "micro"),
            errors=d.get("errors", 0),
        )


def score_run(traces: list[tuple[EvalExample, PipelineTrace]]) -> list[ScoredExample]:
    """Score each trace's final answer against its example's golds.

    Error traces count as wrong: em 0, f1 0, flagged ``errored``.
    """
    scored = []
    for example, trace in traces:
        if trace.error is not None:
            scored.append(
                ScoredExample(
                    example_id=example.id,
                    prediction="",
                    em=0,
                    f1=0.0,
                    reasoning_type=example.reasoning_type,
                    errored=True,
                )
            )
            continue
        pred = trace.final_answer
        em = exact_match(pred, example.gold_answers)
        f1 = 1.0 if em else token_f1(pred, example.gold_answers)
        scored.append(
            ScoredExample(
                example_id=example.id,
                prediction=pred,
                em=em,
                f1=f1,
                reasoning_type=example.reasoning_type,
            )
        )
    return scored


def aggregate(scored: list[ScoredExample], dataset: DatasetKind) -> MetricsReport:
    """Fold scores into a report; per-type breakdown for multi-hop data."""
    n = len(scored)
    errors = sum(1 for s in scored if s.errored)
    if n == 0:
        return MetricsReport(dataset=dataset, n=0, em_pct=None, f1_pct=None, errors=0)
    em_pct = 100.0 * sum(s.em for s in scored) / n
    f1_pct = 100.0 * sum(s.f1 for s in scored) / n
    per_type = None
    total_pct = None
    if dataset is DatasetKind.TWOWIKI:
        per_type = {}
        for rtype in ReasoningType:
            group = [s for s in scored if s.reasoning_type is rtype]
            if not group:
                continue
            per_type[rtype.value] = TypeScore(
                n=len(group),
                em_pct=100.0 * sum(s.em for s in group) / len(group),
                f1_pct=100.0 * sum(s.f1 for s in group) / len(group),
            )
        total_pct = f1_pct  # micro average over all examples
    return MetricsReport(
        dataset=dataset,
        n=n,
        em_pct=em_pct,
        f1_pct=f1_pct,
        per_type=per_type,
        total_pct=total_pct,
        errors=errors,
    )


@dataclass(frozen=True)
class MetricDelta:
    metric: str
    a: float
    b: float

    @property
    def absolute(self) -> float:
        return self.a - self.b

    @property
    def relative_pct(self) -> float | None:
        return 100.0 * self.absolute / self.b if self.b != 0 else None

    @property
    def ratio(self) -> float | None:
        return self.a / self.b if self.b != 0 else None

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "a": self.a,
            "b": self.b,
            "absolute": self.absolute,
            "relative_pct": self.relative_pct,
            "ratio": self.ratio,
        }


@dataclass(frozen=True)
class ReportDiff:
    dataset: DatasetKind
    rows: tuple[MetricDelta, ...]

    def row(self, metric: str) -> MetricDelta:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    def to_dict(self) -> dict:
        return {"dataset": self.dataset.value, "rows": [r.to_dict() for r in self.rows]}

    def render(self) -> str:
        lines = [f"{'metric':<22} {'a':>8} {'b':>8} {'delta':>8} {'rel %':>8} {'ratio':>7}"]
        for r in self.rows:
            rel = f"{r.relative_pct:8.2f}" if r.relative_pct is not None else "     n/a"
            ratio = f"{r.ratio:7.3f}" if r.ratio is not None else "    n/a"
            lines.append(
                f"{r.metric:<22} {r.a:8.2f} {r.b:8.2f} {r.absolute:8.2f} {rel} {ratio}"
            )
        return "\n".join(lines)


def compare_reports(a: MetricsReport, b: MetricsReport) -> ReportDiff:
    """Absolute and relative deltas per metric between two reports."""
    if a.dataset is not b.dataset:
        raise ValidationError(
            f"cannot compare reports for {a.dataset.value} vs {b.dataset.value}"
        )
    rows: list[MetricDelta] = []
    for metric in ("em_pct", "f1_pct", "total_pct"):
        va, vb = getattr(a, metric), getattr(b, metric)
        if va is not None and vb is not None:
            rows.append(MetricDelta(metric=metric, a=va, b=vb))
    if a.per_type and b.per_type:
        for rtype in sorted(set(a.per_type) & set(b.per_type)):
            rows.append(
                MetricDelta(
                    metric=f"{rtype}_f1_pct",
                    a=a.per_type[rtype].f1_pct,
                    b=b.per_type[rtype].f1_pct,
                )
            )
    return ReportDiff(dataset=a.dataset, rows=tuple(rows))
