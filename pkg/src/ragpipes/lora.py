"""Low-rank adapter arithmetic on dense float32 matrices.

A frozen linear layer holds ``W`` of shape (d, k). An adapter holds the
low-rank pair ``A`` (d, r) and ``B`` (r, k) plus its training
hyperparameters. The adapted forward pass is

    y = W x + s * A (B x)

computed through the rank bottleneck (``A @ B`` is never materialized in
the forward path). The scaling factor ``s`` depends on the mode:
``UNIT`` applies s = 1, ``ALPHA_OVER_RANK`` applies the conventional
s = alpha / r. Merging folds ``s * A @ B`` into a new layer so a plain
matrix-vector product reproduces the adapted forward pass.

Matrices are stored as float32; arithmetic is carried out in float64 so
merge-then-forward and adapter-forward agree to well under 1e-5.

Adapter file format (version 1, little-endian):

    bytes 0..7   magic b"RAGLOR01"
    bytes 8..11  u32 CRC32 of everything after this field
    payload:
      u32 version (= 1)
      u32 d, u32 k, u32 r
      f64 alpha, f64 dropout
      u8  scaling mode (0 unit, 1 alpha-over-rank), recorded for provenance
      d*r f32 values of A, row-major
      r*k f32 values of B, row-major

Layer files use the same layout with magic b"RAGLIN01" and payload
u32 version, u32 d, u32 k, d*k f32 values of W.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

_ADAPTER_MAGIC = b"RAGLOR01"
_LAYER_MAGIC = b"RAGLIN01"
_VERSION = 1


class ScalingMode(Enum):
    """How the low-rank update is scaled before being added to W x."""

    UNIT = 0              # s = 1
    ALPHA_OVER_RANK = 1   # s = alpha / r


def _check_matrix(name: str, m: np.ndarray, ndim: int = 2) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float32)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class LinearLayer:
    """A frozen dense layer: W of shape (d, k), float32."""

    W: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _check_matrix("W", self.W))

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _check_vector_for(self, x)
        return self.W.astype(np.float64) @ x

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearLayer):
            return NotImplemented
        return self.W.shape == other.W.shape and bool(np.array_equal(self.W, other.W))


@dataclass(frozen=True, eq=False)
class LoraAdapter:
    """Low-rank pair (A, B) with rank, alpha, and recorded dropout.

    Dropout is provenance only: it applies during training, which is out
    of scope here, and is never used at inference.
    """

    A: np.ndarray
    B: np.ndarray
    rank: int
    alpha: float
    dropout: float = 0.0

    def __post_init__(self):
        A = _check_matrix("A", self.A)
        B = _check_matrix("B", self.B)
        if self.rank < 1:
            raise ValidationError("rank must be a positive integer")
        if A.shape[1] != self.rank:
            raise ValidationError(f"A has {A.shape[1]} columns, expected rank {self.rank}")
        if B.shape[0] != self.rank:
            raise ValidationError(f"B has {B.shape[0]} rows, expected rank {self.rank}")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.B.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoraAdapter):
            return NotImplemented
        return (
            self.rank == other.rank
            and self.alpha == other.alpha
            and self.dropout == other.dropout
            and self.A.shape == other.A.shape
            and self.B.shape == other.B.shape
            and bool(np.array_equal(self.A, other.A))
            and bool(np.array_equal(self.B, other.B))
        )


def scaling_factor(adapter: LoraAdapter, mode: ScalingMode) -> float:
    """The s multiplying the low-rank update: 1 or alpha/rank."""
    if mode is ScalingMode.UNIT:
        return 1.0
    return adapter.alpha / adapter.rank


def _check_vector_for(layer: LinearLayer, x: np.ndarray) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"x must be a 1-D vector, got shape {arr.shape}")
    if arr.shape[0] != layer.k:
        raise ValidationError(f"x has length {arr.shape[0]}, layer input dim is {layer.k}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("x contains non-finite values")
    return arr


def _check_compose(layer: LinearLayer, adapter: LoraAdapter) -> None:
    if adapter.d != layer.d:
        raise ValidationError(
            f"adapter output dim {adapter.d} does not match layer output dim {layer.d}"
        )
    if adapter.k != layer.k:
        raise ValidationError(
            f"adapter input dim {adapter.k} does not match layer input dim {layer.k}"
        )


def lora_forward(
    x: np.ndarray, layer: LinearLayer, adapter: LoraAdapter, mode: ScalingMode
) -> np.ndarray:
    """W x + s * A (B x), computed through the rank-r bottleneck."""
    _check_compose(layer, adapter)
    xv = _check_vector_for(layer, x)
    s = scaling_factor(adapter, mode)
    base = layer.W.astype(np.float64) @ xv
    low = adapter.A.astype(np.float64) @ (adapter.B.astype(np.float64) @ xv)
    return base + s * low


def merge_adapter(layer: LinearLayer, adapter: LoraAdapter, mode: ScalingMode) -> LinearLayer:
    """A new layer with W' = W + s * A @ B; the input layer is untouched."""
    _check_compose(layer, adapter)
    s = scaling_factor(adapter, mode)
    merged = layer.W.astype(np.float64) + s * (
        adapter.A.astype(np.float64) @ adapter.B.astype(np.float64)
    )
    return LinearLayer(merged.astype(np.float32))


def parameter_reduction(layer_shapes: list[tuple[int, int]], r: int) -> float:
    """Trainable-parameter reduction from adapting every listed layer at rank r.

    Returns 1 - sum(r * (d + k)) / sum(d * k). Values above 0.9 mean the
    adapters train fewer than a tenth of the dense parameters.
    """
    if r < 1:
        raise ValidationError("rank must be positive")
    if not layer_shapes:
        raise ValidationError("need at least one layer shape")
    for d, k in layer_shapes:
        if d < 1 or k < 1:
            raise ValidationError(f"invalid layer shape ({d}, {k})")
    adapter_params = sum(r * (d + k) for d, k in layer_shapes)
    dense_params = sum(d * k for d, k in layer_shapes)
    return 1.0 - adapter_params / dense_params


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _write_container(path: str | Path, magic: bytes, payload: bytes) -> None:
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    Path(path).write_bytes(magic + struct.pack("<I", crc) + payload)


def _read_container(path: str | Path, magic: bytes, what: str) -> bytes:
    blob = Path(path).read_bytes()
    if len(blob) < len(magic) + 4:
        raise FormatError(f"{path}: file too short to be {what}")
    if blob[: len(magic)] != magic:
        raise FormatError(f"{path}: bad magic bytes (not {what})")
    (crc,) = struct.unpack("<I", blob[len(magic) : len(magic) + 4])
    payload = blob[len(magic) + 4 :]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise FormatError(f"{path}: checksum mismatch (file is corrupt)")
    return payload


def save_adapter(
    adapter: LoraAdapter, path: str | Path, mode: ScalingMode = ScalingMode.ALPHA_OVER_RANK
) -> None:
    """Persist the adapter; ``mode`` records the intended scaling."""
    header = struct.pack(
        "<IIIIddB",
        _VERSION,
        adapter.d,
        adapter.k,
        adapter.rank,
        adapter.alpha,
        adapter.dropout,
        mode.value,
    )
    payload = header + adapter.A.astype("<f4").tobytes() + adapter.B.astype("<f4").tobytes()
    _write_container(path, _ADAPTER_MAGIC, payload)


def load_adapter(path: str | Path) -> LoraAdapter:
    """Load an adapter file; fields round-trip within float32 exactness."""
    adapter, _mode = _load_adapter_record(path)
    return adapter


def load_adapter_mode(path: str | Path) -> ScalingMode:
    """The scaling mode recorded in an adapter file's header."""
    _adapter, mode = _load_adapter_record(path)
    return mode


def _load_adapter_record(path: str | Path) -> tuple[LoraAdapter, ScalingMode]:
    payload = _read_container(path, _ADAPTER_MAGIC, "an adapter file")
    header_size = struct.calcsize("<IIIIddB")
    if len(payload) < header_size:
        raise FormatError(f"{path}: truncated adapter header")
    version, d, k, r, alpha, dropout, mode_byte = struct.unpack(
        "<IIIIddB", payload[:header_size]
    )
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported adapter version {version}")
    try:
        mode = ScalingMode(mode_byte)
    except ValueError as exc:
        raise FormatError(f"{path}: unknown scaling mode {mode_byte}") from exc
    body = payload[header_size:]
    expected = 4 * (d * r + r * k)
    if len(body) != expected:
        raise FormatError(
            f"{path}: header advertises shapes ({d},{r}) and ({r},{k}) "
            f"needing {expected} payload bytes, found {len(body)}"
        )
    a_bytes = 4 * d * r
    try:
        A = np.frombuffer(body[:a_bytes], dtype="<f4").reshape(d, r)
        B = np.frombuffer(body[a_bytes:], dtype="<f4").reshape(r, k)
        adapter = LoraAdapter(
            A=A.astype(np.float32),
            B=B.astype(np.float32),
            rank=r,
            alpha=alpha,
            dropout=dropout,
        )
    except (ValidationError, ValueError) as exc:
        raise FormatError(f"{path}: malformed adapter payload: {exc}") from exc
    return adapter, mode


def save_layer(layer: LinearLayer, path: str | Path) -> None:
    header = struct.pack("<III", _VERSION, layer.d, layer.k)
    _write_container(path, _LAYER_MAGIC, header + layer.W.astype("<f4").tobytes())


def load_layer(path: str | Path) -> LinearLayer:
    payload = _read_container(path, _LAYER_MAGIC, "a layer file")
    header_size = struct.calcsize("<III")
    if len(payload) < header_size:
        raise FormatError(f"{path}: truncated layer header")
    version, d, k = struct.unpack("<III", payload[:header_size])
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported layer version {version}")
    body = payload[header_size:]
    if len(body) != 4 * d * k:
        raise FormatError(f"{path}: expected {4 * d * k} payload bytes, found {len(body)}")
    try:
        W = np.frombuffer(body, dtype="<f4").reshape(d, k)
        return LinearLayer(W.astype(np.float32))
    except (ValidationError, ValueError) as exc:
        raise FormatError(f"{path}: malformed layer payload: {exc}") from exc
