"""Three-layer prompt assembly and selective chain-of-thought policy.

A prompt is rendered deterministically in a fixed layer order:

    instruction
    demonstrations (reasoning lines included only in CoT mode)
    numbered evidence block (omitted when there is no evidence)
    labeled initial-hypothesis line (two-pass pipelines only)
    question
    answer directive

The CoT policy is a static table: multi-hop examples always reason step
by step; single-hop examples follow a configurable switch. In CoT mode
the directive instructs step-by-step reasoning and a final line starting
with the literal marker ``Answer:``, which :func:`extract_final_answer`
parses back out.

Template texts are not code constants: they ship as versioned UTF-8
assets (see ``templates/qa_default.txt``) in a small sectioned format::

    version: 1
    [instruction]
    ...text...
    [demo]
    question: ...
    reasoning: ...
    answer: ...
    [answer_directive]
    ...text...
    [cot_answer_directive]
    ...text...

``[demo]`` may repeat (0 to 8 times); field values continue over
following lines until the next field or section. A template that carries
a ``cot_answer_directive`` must give every demo a reasoning field.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .datasets import DatasetKind, EvalExample
from .errors import LoadError, ValidationError
from .index import RetrievalHit

ANSWER_MARKER = "Answer:"

_MAX_DEMOS = 8


@dataclass(frozen=True)
class Demo:
    """One few-shot demonstration; reasoning is optional."""

    question: str
    answer: str
    reasoning: str | None = None

    def __post_init__(self):
        if not self.answer:
            raise ValidationError("demo answer must be non-empty")


@dataclass(frozen=True)
class PromptTemplate:
    """Instruction, demonstrations, and the two answer-directive variants.

    ``answer_directive`` closes direct prompts; ``cot_answer_directive``
    closes chain-of-thought prompts (it must request reasoning first and a
    final ``Answer:`` line).
    """

    instruction: str
    demonstrations: tuple[Demo, ...] = ()
    answer_directive: str = "Give only the final answer."
    cot_answer_directive: str = (
        "Reason step by step. After the reasoning, give the final answer on "
        'its own line starting with "Answer:".'
    )
    version: int = 1
    name: str = "inline"

    def __post_init__(self):
        if not self.instruction:
            raise ValidationError("template instruction must be non-empty")
        if len(self.demonstrations) > _MAX_DEMOS:
            raise ValidationError(f"at most {_MAX_DEMOS} demonstrations allowed")

    def validate_for_cot(self) -> None:
        """CoT prompts require every demo to show its reasoning."""
        missing = [d.question for d in self.demonstrations if not d.reasoning]
        if missing:
            raise ValidationError(
                f"CoT use requires reasoning in every demo; missing for: {missing}"
            )


@dataclass(frozen=True)
class CotPolicy:
    """Static chain-of-thought policy.

    Multi-hop questions always get CoT; there is no switch for them.
    ``single_hop`` controls everything else.
    """

    single_hop: bool = False


@dataclass(frozen=True)
class PromptBundle:
    rendered: str
    cot_enabled: bool
    evidence_ids: tuple[str, ...]
    token_estimate: int


@dataclass(frozen=True)
class ExtractedAnswer:
    text: str
    marker_missing: bool = False
    empty: bool = False


def decide_cot_for_kind(kind: DatasetKind, policy: CotPolicy) -> bool:
    if kind is DatasetKind.TWOWIKI:
        return True
    return policy.single_hop


def decide_cot(example: EvalExample, policy: CotPolicy) -> bool:
    """Apply the policy table: multi-hop always, single-hop per switch."""
    return decide_cot_for_kind(example.dataset, policy)


def assemble_prompt(
    template: PromptTemplate,
    question: str,
    evidence: list[RetrievalHit],
    cot: bool,
    prior_answer: str | None = None,
) -> PromptBundle:
    """Render the prompt layers in their fixed order.

    Evidence lines are numbered in hit-rank order and show each hit's
    display text. A prior answer, when given, appears as a labeled
    hypothesis line between the evidence and the question.
    """
    if not question:
        raise ValidationError("question must be non-empty")
    blocks: list[str] = [template.instruction]
    for demo in template.demonstrations:
        lines = [f"Question: {demo.question}"]
        if cot and demo.reasoning:
            lines.append(f"Reasoning: {demo.reasoning}")
        lines.append(f"{ANSWER_MARKER} {demo.answer}")
        blocks.append("\n".join(lines))
    if evidence:
        ev_lines = ["Evidence:"]
        ev_lines.extend(
            f"[{hit.rank}] {hit.entry.display_text}" for hit in evidence
        )
        blocks.append("\n".join(ev_lines))
    if prior_answer is not None:
        blocks.append(f"Initial hypothesis: {prior_answer}")
    directive = template.cot_answer_directive if cot else template.answer_directive
    blocks.append(f"Question: {question}\n{directive}")
    rendered = "\n\n".join(blocks)
    return PromptBundle(
        rendered=rendered,
        cot_enabled=cot,
        evidence_ids=tuple(hit.entry.entry_id for hit in evidence),
        token_estimate=len(rendered.split()),
    )


def extract_final_answer(generation: str, cot: bool) -> ExtractedAnswer:
    """Pull the final answer out of a generation.

    CoT mode takes everything after the last line beginning with the
    ``Answer:`` marker; a missing marker falls back to the last non-empty
    line and flags it. Direct mode returns the whole generation trimmed.
    An empty result is flagged rather than raised.
    """
    text = generation.strip()
    if not text:
        return ExtractedAnswer(text="", empty=True, marker_missing=cot)
    if not cot:
        return ExtractedAnswer(text=text)
    lines = generation.split("\n")  # literal newlines only, so answers round-trip
    marker_at = None
    for i, line in enumerate(lines):
        if line.lstrip().startswith(ANSWER_MARKER):
            marker_at = i
    if marker_at is None:
        fallback = [ln for ln in lines if ln.strip()][-1].strip()
        return ExtractedAnswer(text=fallback, marker_missing=True, empty=not fallback)
    head = lines[marker_at].lstrip()[len(ANSWER_MARKER):]
    tail = lines[marker_at + 1 :]
    answer = "\n".join([head, *tail]).strip() if tail else head.strip()
    return ExtractedAnswer(text=answer, empty=not answer)


# ---------------------------------------------------------------------------
# Template assets
# ---------------------------------------------------------------------------

_DEMO_FIELDS = ("question", "reasoning", "answer")
_SECTIONS = ("instruction", "demo", "answer_directive", "cot_answer_directive")


def parse_template_text(text: str, name: str = "inline") -> PromptTemplate:
    """Parse the sectioned template asset format described in the module docs."""
    version = 1
    instruction: list[str] = []
    directives: dict[str, list[str]] = {"answer_directive": [], "cot_answer_directive": []}
    demos: list[dict[str, str]] = []
    section: str | None = None
    current_demo: dict[str, list[str]] | None = None
    demo_field: str | None = None

    def flush_demo():
        nonlocal current_demo
        if current_demo is not None:
            demos.append({k: "\n".join(v).strip() for k, v in current_demo.items()})
            current_demo = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        stripped = line.strip()
        if section is None and stripped.startswith("version:"):
            try:
                version = int(stripped.split(":", 1)[1])
            except ValueError as exc:
                raise LoadError(f"template {name}:{line_no}: bad version line") from exc
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            label = stripped[1:-1]
            if label not in _SECTIONS:
                raise LoadError(f"template {name}:{line_no}: unknown section [{label}]")
            flush_demo()
            section = label
            if label == "demo":
                current_demo = {}
                demo_field = None
            continue
        if section is None:
            if stripped:
                raise LoadError(f"template {name}:{line_no}: text before first section")
            continue
        if section == "instruction":
            instruction.append(line)
        elif section in directives:
            directives[section].append(line)
        else:  # demo fields
            key = next(
                (f for f in _DEMO_FIELDS if stripped.startswith(f + ":")), None
            )
            if key is not None:
                demo_field = key
                current_demo[key] = [stripped[len(key) + 1 :].strip()]
            elif demo_field is not None and stripped:
                current_demo[demo_field].append(stripped)
            elif stripped:
                raise LoadError(
                    f"template {name}:{line_no}: demo line outside a field"
                )
    flush_demo()

    try:
        template = PromptTemplate(
            instruction="\n".join(instruction).strip(),
            demonstrations=tuple(
                Demo(
                    question=d.get("question", ""),
                    answer=d.get("answer", ""),
                    reasoning=d.get("reasoning") or None,
                )
                for d in demos
            ),
            answer_directive="\n".join(directives["answer_directive"]).strip()
            or PromptTemplate.__dataclass_fields__["answer_directive"].default,
            cot_answer_directive="\n".join(directives["cot_answer_directive"]).strip()
            or PromptTemplate.__dataclass_fields__["cot_answer_directive"].default,
            version=version,
            name=name,
        )
    except ValidationError as exc:
        raise LoadError(f"template {name}: {exc}") from exc
    if directives["cot_answer_directive"] and any(
        not d.reasoning for d in template.demonstrations
    ):
        raise LoadError(f"template {name}: CoT template demos must all carry reasoning")
    return template


def load_template(path: str | Path) -> PromptTemplate:
    path = Path(path)
    return parse_template_text(path.read_text(encoding="utf-8"), name=path.stem)


def builtin_template(name: str = "qa_default") -> PromptTemplate:
    """Load one of the template assets bundled with the package."""
    ref = resources.files("ragpipes").joinpath(f"templates/{name}.txt")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise LoadError(f"no bundled template named '{name}'") from exc
    return parse_template_text(text, name=name)
