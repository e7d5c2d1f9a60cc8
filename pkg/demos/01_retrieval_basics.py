"""Walkthrough: embedding text and querying a flat cosine index.

The deterministic test embedder hashes word n-grams into Gaussian
directions and L2-normalizes the sum, so everything here runs offline
and reproduces bit-for-bit on every machine.
"""

from pathlib import Path
from tempfile import TemporaryDirectory

import ragpipes
from ragpipes import (
    EmbedderKind,
    EmbedderSpec,
    build_index,
    cosine_similarity,
    embed,
    load_index,
    retrieve_top_k,
    save_index,
)
from ragpipes.datasets import load_corpus_jsonl

FIXTURES = Path(ragpipes.__file__).parent / "fixtures"

embedder = EmbedderSpec(kind=EmbedderKind.DETERMINISTIC_TEST, dim=48)

# Vectors are normalized at creation, so cosine similarity is a dot product.
u = embed("heart attack", embedder)
v = embed("heart attack", embedder)
w = embed("myocardial infarction", embedder)
print(f"embedding dim {u.dim}, norm {u.norm():.9f}")
print(f"identical text  -> cosine {cosine_similarity(u, v):.6f}")
print(f"different text  -> cosine {cosine_similarity(u, w):.6f}")
print("(the test embedder makes no semantic claims; it is deterministic)")

# Build an index over the bundled 12-document toy corpus.
corpus = load_corpus_jsonl(FIXTURES / "corpus.jsonl", name="toy")
index = build_index(corpus, embedder)
print(f"\nindexed {len(index)} documents from '{corpus.name}'")

# Exhaustive exact retrieval: score every entry, sort by (score desc, id asc).
query = embed("Which drug helps with type 2 diabetes?", embedder)
print("\ntop 3 for 'Which drug helps with type 2 diabetes?':")
for hit in retrieve_top_k(index, query, 3):
    print(f"  rank {hit.rank}  score {hit.score:+.4f}  [{hit.entry.entry_id}] "
          f"{hit.entry.display_text[:60]}")

# Round-trip through the binary container; scores are preserved exactly.
with TemporaryDirectory() as tmp:
    path = Path(tmp) / "toy.idx"
    save_index(index, path)
    reloaded = load_index(path)
    rescored = retrieve_top_k(reloaded, query, 3)
    print(f"\nsaved {path.stat().st_size} bytes; reloaded scores match:",
          [f"{h.score:+.4f}" for h in rescored])
