"""Regenerate the bundled scripted-generator responses (stub_script.json).

The bundled fixtures let the whole workflow run offline: the scripted
generator answers every prompt the toy corpus and toy datasets can
produce. Because prompts are deterministic functions of the fixtures,
this script can enumerate them exactly the way the pipelines will:

1. per-document augmentation prompts (one paraphrase, one QA pair each;
   one paraphrase deliberately drops a protected term so the discard
   path shows up in the augmentation report);
2. per-example generation prompts for every (dataset, variant) cell of
   the golden run matrix, with a fixed share of deliberately wrong
   answers per cell so the evaluation reports are interesting.

Run it after changing fixtures, templates, or prompt rendering:

    python demos/build_stub_script.py

and commit the refreshed stub_script.json plus any golden files that
legitimately changed.
"""

from __future__ import annotations

import json
from pathlib import Path

import ragpipes
from ragpipes import (
    AugmentationConfig,
    EmbedderKind,
    EmbedderSpec,
    GeneratorKind,
    GeneratorSpec,
    assemble_prompt,
    augment_index,
    build_index,
    builtin_template,
    embed,
    extract_final_answer,
    load_pubmedqa,
    load_twowiki,
    retrieve_top_k,
)
from ragpipes.augmentation import qa_generation_prompt, rewrite_prompt
from ragpipes.datasets import load_corpus_jsonl
from ragpipes.generation import prompt_fingerprint

FIXTURES = Path(ragpipes.__file__).parent / "fixtures"
EMBEDDER = EmbedderSpec(kind=EmbedderKind.DETERMINISTIC_TEST, dim=48)
TOP_K = 3
PRESERVE = ("Metformin", "HbA1c", "ICD-10")

# --- augmentation content ---------------------------------------------------
# Paraphrases; b6's drops "ICD-10" on purpose and will be rejected.
PARAPHRASES = {
    "b1": "As the first treatment choice in type 2 diabetes, Metformin brings blood glucose down.",
    "b2": "By blocking prostaglandin synthesis, aspirin eases fever and inflammation.",
    "b3": "Average glucose over roughly three months shows up in the HbA1c value.",
    "b4": "In postmenopausal women, bone density benefits from vitamin D supplementation.",
    "b5": "Viral respiratory infections do not respond to antibiotics.",
    "b6": "That coding system sorts diagnoses for clinical records.",
    "w1": "Starting in the Swiss Alps, the Rhine passes Basel on its way to the North Sea.",
    "w2": "The Netherlands keeps its capital in Amsterdam even though the government sits in The Hague.",
    "w3": "Africa's tallest peak is Mount Kilimanjaro at 5895 metres.",
    "w4": "Nobel Prizes in physics and in chemistry both went to Marie Curie.",
    "w5": "Flowing to the Black Sea, the Danube outstretches the Rhine.",
    "w6": "Where Switzerland, France, and Germany touch, Basel lies on the Rhine.",
}

# Pseudo-queries, phrased with little word overlap with their source
# passages so the unaugmented index misses some of them at top-1.
SYNTHETIC_QA = {
    "b1": ("Which tablet is prescribed initially to bring sugar readings down in diabetics?",
           "Metformin"),
    "b2": ("What common pill cools a feverish patient?", "aspirin"),
    "b3": ("Which lab value summarises sugar control across a quarter of a year?", "HbA1c"),
    "b4": ("What supplement strengthens skeletons of older women?", "vitamin D"),
    "b5": ("Why do bacterial drugs fail against colds and flu?",
           "they target bacteria, not viruses"),
    "b6": ("Which catalogue assigns codes to illnesses in hospital paperwork?", "ICD-10"),
    "w1": ("Where does the waterway passing Basel finally empty?", "the North Sea"),
    "w2": ("Which Dutch city holds capital status?", "Amsterdam"),
    "w3": ("What is the tallest summit on the African continent?", "Mount Kilimanjaro"),
    "w4": ("Who collected top science awards in two different disciplines?", "Marie Curie"),
    "w5": ("Which European river beats the Rhine in length?", "the Danube"),
    "w6": ("At which spot do three European countries share a riverbank?", "Basel"),
}

# --- wrong-answer plans per golden-run cell ---------------------------------
WRONG = {
    ("pubmedqa", "standard"): {"p4": "yes", "p7": "yes", "p9": "yes", "p10": "no"},
    ("pubmedqa", "da"): {"p9": "yes", "p10": "no"},
    ("pubmedqa", "prag"): {"p9": "yes"},
    ("twowiki", "standard"): {"t4": "the Black Sea", "t5": "The Hague", "t7": "yes",
                              "t8": "yes", "t9": "Cologne", "t10": "the Black Sea"},
    ("twowiki", "da"): {"t4": "the Black Sea", "t7": "yes", "t8": "yes",
                        "t9": "Cologne", "t10": "the Black Sea"},
    ("twowiki", "prag"): {"t7": "yes", "t8": "yes"},
}

# Pass-1 (no-evidence) answers for the two-pass runs: partly wrong on
# purpose, so pass 2 visibly corrects the parametric prior.
PRAG_PASS1_WRONG = {
    "pubmedqa": {"p4": "yes", "p7": "yes", "p9": "yes"},
    "twowiki": {"t4": "the Black Sea", "t5": "The Hague", "t7": "yes",
                "t8": "yes", "t9": "Cologne", "t10": "the Black Sea"},
}


def response_text(answer: str, cot: bool, lead: str) -> str:
    if not cot:
        return answer
    return f"{lead}\nAnswer: {answer}"


def main() -> None:
    corpus = load_corpus_jsonl(FIXTURES / "corpus.jsonl", name="toy")
    template = builtin_template("qa_default")
    responses: dict[str, str] = {}

    # 1. Augmentation prompts.
    for doc in corpus.documents:
        responses[prompt_fingerprint(rewrite_prompt(doc, 1, PRESERVE))] = PARAPHRASES[doc.id]
        question, answer = SYNTHETIC_QA[doc.id]
        responses[prompt_fingerprint(qa_generation_prompt(doc, 1))] = (
            f"Q: {question}\nA: {answer}"
        )

    # 2. Build the same indexes the CLI workflow builds.
    base_index = build_index(corpus, EMBEDDER, name="toy")
    aug_config = AugmentationConfig(
        rewrites_per_doc=1,
        qa_pairs_per_doc=1,
        rewriter=GeneratorSpec(kind=GeneratorKind.STUB_SCRIPTED, script=dict(responses)),
        preserve_terms=PRESERVE,
    )
    aug_index = augment_index(base_index, corpus, aug_config, EMBEDDER)
    print(f"base index: {len(base_index)} entries, augmented: {len(aug_index)} entries")

    datasets = {
        "pubmedqa": load_pubmedqa(FIXTURES / "pubmedqa.json"),
        "twowiki": load_twowiki(FIXTURES / "twowiki.json"),
    }

    # 3. Generation prompts for every golden-run cell. CoT mirrors the CLI
    #    invocations: twowiki always reasons; pubmedqa reasons only in the
    #    two-pass run (invoked with --cot on).
    for dataset_name, examples in datasets.items():
        for variant in ("standard", "da", "prag"):
            cot = dataset_name == "twowiki" or variant == "prag"
            index = aug_index if variant == "da" else base_index
            wrong = WRONG[(dataset_name, variant)]
            for example in examples:
                gold = example.gold_answers[0]
                final = wrong.get(example.id, gold)
                if variant == "prag":
                    pass1_map = PRAG_PASS1_WRONG[dataset_name]
                    pass1 = pass1_map.get(example.id, gold)
                    pass1_response = response_text(
                        pass1, cot, "From prior knowledge alone, before seeing evidence."
                    )
                    pass1_prompt = assemble_prompt(template, example.question, [], cot)
                    responses[prompt_fingerprint(pass1_prompt.rendered)] = pass1_response
                    pass1_answer = extract_final_answer(pass1_response, cot).text
                    hits = retrieve_top_k(index, embed(example.question, EMBEDDER),
                                          TOP_K, dedupe_parents=True)
                    pass2_prompt = assemble_prompt(
                        template, example.question, hits, cot, prior_answer=pass1_answer
                    )
                    responses[prompt_fingerprint(pass2_prompt.rendered)] = response_text(
                        final, cot, "Checking the hypothesis against the evidence."
                    )
                else:
                    hits = retrieve_top_k(index, embed(example.question, EMBEDDER),
                                          TOP_K, dedupe_parents=True)
                    prompt = assemble_prompt(template, example.question, hits, cot)
                    responses[prompt_fingerprint(prompt.rendered)] = response_text(
                        final, cot, "The evidence settles it."
                    )

    out = FIXTURES / "stub_script.json"
    out.write_text(
        json.dumps({"responses": responses, "default": None}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(responses)} scripted responses to {out}")


if __name__ == "__main__":
    main()
