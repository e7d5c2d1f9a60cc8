"""Text embedding behind a pluggable embedder abstraction.

Two embedder kinds are supported:

* ``DETERMINISTIC_TEST`` -- an offline embedder for tests and demos: each
  word unigram/bigram of the input is hashed (keyed blake2b with a fixed
  internal seed) into a Gaussian direction of the requested dimension; the
  sum is L2-normalized. It is a pure function of (text, dim) with no
  semantic claims, but identical texts always embed identically and texts
  sharing n-grams correlate.
* ``REMOTE_HTTP`` -- POSTs ``{"model": ..., "input": [texts]}`` to an
  embeddings endpoint and expects ``{"data": [{"embedding": [...]}]}``,
  the de-facto JSON shape served by off-the-shelf inference servers.
  Retryable failures back off exponentially with jitter. The API key, if
  any, is read from the ``RAGPIPES_API_KEY`` environment variable.

All vectors produced here are L2-normalized at creation, so downstream
cosine similarity reduces to a dot product.
"""

from __future__ import annotations

import hashlib
import os
import random
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
import requests

from .errors import ProtocolError, TransportError, ValidationError

# Internal seed for the deterministic test embedder. Changing it changes
# every test vector, so it is fixed for the lifetime of the format.
_HASH_SEED = b"ragpipes-embed-v1"

_NORM_TOLERANCE = 1e-6


class EmbedderKind(Enum):
    DETERMINISTIC_TEST = "deterministic"
    REMOTE_HTTP = "http"


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A fixed-dimension vector of finite floats.

    float32 input stays float32 (the on-disk precision); anything else is
    held as float64.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.dtype != np.float32:
            arr = arr.astype(np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("embedding contains non-finite values")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values.astype(np.float64)))

    def is_normalized(self, tolerance: float = _NORM_TOLERANCE) -> bool:
        return abs(self.norm() - 1.0) <= tolerance

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim})"


@dataclass(frozen=True)
class EmbedderSpec:
    kind: EmbedderKind
    dim: int
    endpoint: str | None = None
    model_name: str | None = None
    timeout: float = 30.0
    max_retries: int = 3
    batch_size: int = 64

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("embedder dim must be positive")
        if self.kind is EmbedderKind.REMOTE_HTTP and not self.endpoint:
            raise ValidationError("REMOTE_HTTP embedder requires an endpoint")
        if self.kind is not EmbedderKind.REMOTE_HTTP and self.endpoint:
            raise ValidationError("endpoint only applies to REMOTE_HTTP embedders")


def _gram_direction(gram: str, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=_HASH_SEED).digest()
    rs = np.random.RandomState(int.from_bytes(digest[:4], "little"))
    return rs.standard_normal(dim)

def _deterministic_vector(text: str, dim: int) -> np.ndarray:
    tokens = text.split()
    grams = list(tokens)
    grams.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    grams.append(f"\x00{text}")  # whole-text gram guarantees a nonzero sum
    acc = np.zeros(dim, dtype=np.float64)
    for gram in grams:
        acc += _gram_direction(gram, dim)
    norm = np.linalg.norm(acc)
    if norm == 0.0:  # astronomically unlikely cancellation
        acc = _gram_direction(f"\x01{text}", dim)
        norm = np.linalg.norm(acc)
    return (acc / norm).astype(np.float32)


def _api_headers() -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get("RAGPIPES_API_KEY")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    return headers


def _post_with_retries(url: str, body: dict, timeout: float, max_retries: int) -> dict:
    """POST JSON with exponential backoff on retryable failures.

    Retryable: connection errors, timeouts, HTTP 5xx and 429. Other non-2xx
    statuses fail immediately as protocol errors.
    """
    attempts = 0
    delay = 0.25
    last_error: Exception | None = None
    while attempts < max_retries:
        attempts += 1
        try:
            resp = requests.post(url, json=body, headers=_api_headers(), timeout=timeout)
        except requests.RequestException as exc:
            last_error = exc
        else:
            if resp.status_code // 100 == 2:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ProtocolError(f"{url} returned non-JSON body: {exc}") from exc
            if resp.status_code >= 500 or resp.status_code == 429:
                last_error = TransportError(f"HTTP {resp.status_code} from {url}", attempts)
            else:
                raise ProtocolError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
        if attempts < max_retries:
            time.sleep(delay * (1.0 + random.random()))
            delay *= 2
    raise TransportError(f"request to {url} failed: {last_error}", attempts)


def _remote_embed_batch(texts: list[str], spec: EmbedderSpec) -> list[EmbeddingVector]:
    vectors: list[EmbeddingVector] = []
    for start in range(0, len(texts), spec.batch_size):
        chunk = texts[start : start + spec.batch_size]
        body = {"model": spec.model_name or "default", "input": chunk}
        payload = _post_with_retries(spec.endpoint, body, spec.timeout, spec.max_retries)
        data = payload.get("data")
        if not isinstance(data, list) or len(data) != len(chunk):
            got = len(data) if isinstance(data, list) else type(data).__name__
            raise ProtocolError(
                f"embeddings endpoint returned {got} items for {len(chunk)} inputs"
            )
        for offset, item in enumerate(data):
            raw = item.get("embedding") if isinstance(item, dict) else None
            if raw is None:
                raise ProtocolError(f"missing 'embedding' in response item {start + offset}")
            arr = np.asarray(raw, dtype=np.float32)
            if arr.ndim != 1 or arr.shape[0] != spec.dim:
                raise ProtocolError(
                    f"text {start + offset}: expected dim {spec.dim}, got shape {arr.shape}"
                )
            norm = np.linalg.norm(arr.astype(np.float64))
            if norm == 0.0:
                raise ProtocolError(f"text {start + offset}: endpoint returned a zero vector")
            vectors.append(EmbeddingVector((arr / norm).astype(np.float32)))
    return vectors


def embed(text: str, spec: EmbedderSpec) -> EmbeddingVector:
    """Embed one text into an L2-normalized vector of ``spec.dim`` floats."""
    if not text:
        raise ValidationError("cannot embed empty text")
    if spec.kind is EmbedderKind.DETERMINISTIC_TEST:
        return EmbeddingVector(_deterministic_vector(text, spec.dim))
    return _remote_embed_batch([text], spec)[0]


def embed_batch(texts: list[str], spec: EmbedderSpec) -> list[EmbeddingVector]:
    """Embed many texts; output order matches input order.

    Pointwise equivalent to mapping :func:`embed` over ``texts`` for every
    embedder kind. The first invalid element fails with its index.
    """
    for i, text in enumerate(texts):
        if not text:
            raise ValidationError(f"cannot embed empty text (batch index {i})")
    if not texts:
        return []
    if spec.kind is EmbedderKind.DETERMINISTIC_TEST:
        return [EmbeddingVector(_deterministic_vector(t, spec.dim)) for t in texts]
    return _remote_embed_batch(texts, spec)
