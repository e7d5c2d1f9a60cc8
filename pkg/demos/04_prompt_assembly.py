"""Walkthrough: the three-layer prompt and selective chain-of-thought.

Layer order is fixed: instruction, demonstrations, numbered evidence,
optional hypothesis line, question, answer directive. The CoT policy is a
static table (multi-hop always reasons; single-hop follows a switch), and
the directive changes with the mode so the final answer stays parseable.
"""

import numpy as np

from ragpipes import (
    CotPolicy,
    DatasetKind,
    EmbeddingVector,
    EntryKind,
    EvalExample,
    IndexEntry,
    ReasoningType,
    RetrievalHit,
    assemble_prompt,
    builtin_template,
    decide_cot,
    extract_final_answer,
)

template = builtin_template("qa_default")
print(f"template '{template.name}' v{template.version}: "
      f"{len(template.demonstrations)} demonstrations")

# The policy table in action.
multihop = EvalExample(id="m", question="q", gold_answers=("a",),
                       dataset=DatasetKind.TWOWIKI, reasoning_type=ReasoningType.BRIDGE)
singlehop = EvalExample(id="s", question="q", gold_answers=("yes",),
                        dataset=DatasetKind.PUBMEDQA)
for switch in (False, True):
    policy = CotPolicy(single_hop=switch)
    print(f"single_hop switch {switch}: multi-hop -> {decide_cot(multihop, policy)}, "
          f"single-hop -> {decide_cot(singlehop, policy)}")

# Assemble a prompt with two evidence passages and a prior hypothesis.
def hit(rank, text):
    entry = IndexEntry(entry_id=f"e{rank}", vector=EmbeddingVector(np.ones(4)),
                       parent_doc_id=f"d{rank}", entry_kind=EntryKind.ORIGINAL,
                       display_text=text)
    return RetrievalHit(entry=entry, score=1.0 - 0.1 * rank, rank=rank)

evidence = [hit(1, "Metformin lowers blood glucose."),
            hit(2, "HbA1c reflects average glucose over three months.")]
bundle = assemble_prompt(template, "Does metformin lower blood glucose?",
                         evidence, cot=True, prior_answer="yes")
print("\n--- rendered prompt " + "-" * 40)
print(bundle.rendered)
print("--- end prompt " + "-" * 45)
print(f"evidence ids {list(bundle.evidence_ids)}, ~{bundle.token_estimate} tokens")

# Extraction: CoT answers end with a marker line; direct answers pass through.
generation = "The evidence confirms the effect.\nAnswer: yes"
print(f"\nCoT generation {generation!r}")
print(f"  -> extracted {extract_final_answer(generation, cot=True).text!r}")
unmarked = extract_final_answer("just reasoning, no marker", cot=True)
print(f"missing marker -> fallback {unmarked.text!r}, flagged: {unmarked.marker_missing}")
