"""Language-model abstraction: deterministic stubs plus an HTTP client.

Stubs make every pipeline fully testable offline:

* ``STUB_ECHO`` answers with the prompt's final question line, prefixed
  with the answer marker.
* ``STUB_SCRIPTED`` looks up a canned response by a stable fingerprint of
  the prompt (falling back to a designated default when configured).

``REMOTE_HTTP`` posts the de-facto completions JSON shape
``{"model", "prompt", "max_tokens", "temperature"}`` and reads the first
choice's text, so a local inference server hosting any model plugs in
without glue. Temperature defaults to 0 for reproducible runs. The API
key, if any, comes from the ``RAGPIPES_API_KEY`` environment variable and
is never logged.

Prompt fingerprints are the first 16 hex digits of a keyed blake2b hash
of the whitespace-normalized prompt (runs of whitespace collapse to one
space), so whitespace-only template edits do not invalidate a script.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigError, ProtocolError, ValidationError
from .embedding import _post_with_retries  # shared retry/backoff POST helper

logger = logging.getLogger(__name__)

_FINGERPRINT_KEY = b"ragpipes-script-v1"


class GeneratorKind(Enum):
    STUB_ECHO = "echo"
    STUB_SCRIPTED = "scripted"
    REMOTE_HTTP = "http"


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind
    endpoint: str | None = None
    model_name: str | None = None
    max_tokens: int = 256
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    script: dict[str, str] = field(default_factory=dict)
    script_default: str | None = None

    def __post_init__(self):
        if self.kind is GeneratorKind.REMOTE_HTTP and not self.endpoint:
            raise ValidationError("REMOTE_HTTP generator requires an endpoint")
        if self.kind is not GeneratorKind.REMOTE_HTTP and self.endpoint:
            raise ValidationError("endpoint only applies to REMOTE_HTTP generators")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValidationError("max_tokens must be positive")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    latency: float
    token_usage: dict[str, int] | None = None
    truncated: bool = False


def prompt_fingerprint(prompt: str) -> str:
    """Stable 64-bit hex fingerprint of the whitespace-normalized prompt."""
    normalized = " ".join(prompt.split())
    return hashlib.blake2b(
        normalized.encode("utf-8"), digest_size=8, key=_FINGERPRINT_KEY
    ).hexdigest()


def _echo_response(prompt: str) -> str:
    question = None
    for line in prompt.splitlines():
        if line.startswith("Question:"):
            question = line[len("Question:"):].strip()
    if question is None:
        non_empty = [ln.strip() for ln in prompt.splitlines() if ln.strip()]
        question = non_empty[-1] if non_empty else ""
    return f"Answer: {question}"


def generate(prompt: str, spec: GeneratorSpec, verbose: bool = False) -> GenerationResult:
    """Run one generation; stubs are pure functions of (prompt, spec)."""
    if not prompt:
        raise ValidationError("cannot generate from an empty prompt")
    start = time.perf_counter()
    if spec.kind is GeneratorKind.STUB_ECHO:
        text = _echo_response(prompt)
        return GenerationResult(text=text, latency=time.perf_counter() - start)
    if spec.kind is GeneratorKind.STUB_SCRIPTED:
        fp = prompt_fingerprint(prompt)
        text = spec.script.get(fp, spec.script_default)
        if text is None:
            raise ConfigError(
                f"scripted generator has no response for fingerprint {fp} and no default"
            )
        return GenerationResult(text=text, latency=time.perf_counter() - start)
    body = {
        "model": spec.model_name or "default",
        "prompt": prompt,
        "max_tokens": spec.max_tokens,
        "temperature": spec.temperature,
    }
    if verbose:
        logger.debug("POST %s body=%r", spec.endpoint, body)
    payload = _post_with_retries(spec.endpoint, body, spec.timeout, spec.max_retries)
    if verbose:
        logger.debug("response=%r", payload)
    choices = payload.get("choices")
    if not isinstance(choices, list) or not choices or "text" not in choices[0]:
        raise ProtocolError(
            f"completions endpoint returned no choices[0].text: {str(payload)[:200]}"
        )
    usage = payload.get("usage") if isinstance(payload.get("usage"), dict) else None
    truncated = choices[0].get("finish_reason") == "length"
    return GenerationResult(
        text=str(choices[0]["text"]),
        latency=time.perf_counter() - start,
        token_usage=usage,
        truncated=truncated,
    )
