"""Compression operators used on the simulated wire.

Two operator families:

* contractive compressors ``C`` with ``E||C(x) - x||^2 <= (1 - delta)||x||^2``
  (TopK, identity), possibly biased;
* unbiased quantizers ``Q`` with ``E[Q(x)] = x`` and
  ``E||Q(x) - x||^2 <= omega ||x||^2`` (RandK, lp-dithering, identity).

Every operator maps 0 -> 0 and never draws randomness on a zero input, which
the DIANA fixed-point tests rely on.  Randomness comes exclusively from an
:class:`RngStream` owned by the caller, so replaying a stream replays the
operator's outputs bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OperatorConfigError(ValueError):
    """Raised for ill-formed operator specs (unknown name, k > d, ...)."""


_PURPOSE_TAGS = {"sampling": 0, "refresh": 1, "quantizer": 2, "master": 3, "init": 4}


class RngStream:
    """Counter-based random stream keyed by (seed, worker id, purpose tag).

    Distinct (seed, stream_id) pairs give statistically independent Philox
    streams; re-creating a stream with the same key replays the identical
    sequence.
    """

    def __init__(self, seed: int, worker_id: int = 0, purpose: str = "sampling"):
        if purpose not in _PURPOSE_TAGS:
            raise ValueError(f"unknown stream purpose {purpose!r}")
        self.seed = int(seed)
        self.stream_id = (int(worker_id), purpose)
        key = np.random.SeedSequence(
            [self.seed, int(worker_id), _PURPOSE_TAGS[purpose]]
        )
        self._gen = np.random.Generator(np.random.Philox(key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size=size)

    def random(self, size=None):
        return self._gen.random(size)

    def choice_without_replacement(self, d: int, k: int) -> np.ndarray:
        return self._gen.choice(d, size=k, replace=False)


@dataclass(frozen=True)
class ContractiveCompressor:
    """TopK sparsification or the identity, with its contraction factor."""

    kind: str  # "topk" | "identity"
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("topk", "identity"):
            raise OperatorConfigError(f"unknown compressor kind {self.kind!r}")
        if self.kind == "topk" and self.k < 1:
            raise OperatorConfigError("topk needs k >= 1")

    def delta(self, d: int) -> float:
        """Contraction factor delta in (0, 1] at dimension d."""
        if self.kind == "identity":
            return 1.0
        self._check_dim(d)
        return self.k / d

    def _check_dim(self, d: int) -> None:
        if self.kind == "topk" and self.k > d:
            raise OperatorConfigError(f"topk k={self.k} exceeds dimension d={d}")

    def __str__(self) -> str:
        return "identity" if self.kind == "identity" else f"topk:{self.k}"


@dataclass(frozen=True)
class UnbiasedQuantizer:
    """RandK sparsification, lp-dithering (p in {2, inf}) or the identity."""

    kind: str  # "randk" | "dither" | "identity"
    k: int = 0
    p: str = ""  # "l2" | "linf" for dither

    def __post_init__(self):
        if self.kind not in ("randk", "dither", "identity"):
            raise OperatorConfigError(f"unknown quantizer kind {self.kind!r}")
        if self.kind == "randk" and self.k < 1:
            raise OperatorConfigError("randk needs k >= 1")
        if self.kind == "dither" and self.p not in ("l2", "linf"):
            raise OperatorConfigError("dither needs p in {l2, linf}")

    def omega(self, d: int) -> float:
        """Variance factor omega >= 0 at dimension d."""
        if self.kind == "identity":
            return 0.0
        if self.kind == "randk":
            self._check_dim(d)
            return d / self.k - 1.0
        if self.p == "l2":
            return math.sqrt(d) - 1.0
        return (1.0 + math.sqrt(d)) / 2.0 - 1.0

    def _check_dim(self, d: int) -> None:
        if self.kind == "randk" and self.k > d:
            raise OperatorConfigError(f"randk k={self.k} exceeds dimension d={d}")

    def __str__(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "randk":
            return f"randk:{self.k}"
        return f"dither:{self.p}"


IDENTITY_COMPRESSOR = ContractiveCompressor("identity")
IDENTITY_QUANTIZER = UnbiasedQuantizer("identity")


def parse_operator(spec: str):
    """Parse an operator config string.

    Accepted forms: ``topk:K``, ``randk:K``, ``dither:l2``, ``dither:linf``,
    ``identity``.  Returns a ContractiveCompressor or UnbiasedQuantizer.
    """
    s = spec.strip().lower()
    if s == "identity":
        return IDENTITY_COMPRESSOR
    head, sep, arg = s.partition(":")
    if head == "topk" and sep:
        try:
            return ContractiveCompressor("topk", k=int(arg))
        except ValueError as exc:
            raise OperatorConfigError(f"bad topk arg {arg!r}") from exc
    if head == "randk" and sep:
        try:
            return UnbiasedQuantizer("randk", k=int(arg))
        except ValueError as exc:
            raise OperatorConfigError(f"bad randk arg {arg!r}") from exc
    if head == "dither" and arg in ("l2", "linf"):
        return UnbiasedQuantizer("dither", p=arg)
    raise OperatorConfigError(f"unknown operator spec {spec!r}")


def as_quantizer(spec) -> UnbiasedQuantizer:
    """Coerce a parsed operator or string to a quantizer, identity included."""
    if isinstance(spec, str):
        spec = parse_operator(spec)
    if isinstance(spec, ContractiveCompressor):
        if spec.kind == "identity":
            return IDENTITY_QUANTIZER
        raise OperatorConfigError(f"{spec} is not an unbiased quantizer")
    return spec


def compress(comp: ContractiveCompressor, x: np.ndarray) -> np.ndarray:
    """Apply a contractive compressor.  Deterministic; ties at the TopK
    boundary keep the lowest-index coordinate."""
    if comp.kind == "identity":
        return x.copy()
    d = x.shape[0]
    comp._check_dim(d)
    if comp.k == d:
        return x.copy()
    # stable argsort on -|x| keeps the lowest index among equal magnitudes
    order = np.argsort(-np.abs(x), kind="stable")
    out = np.zeros_like(x)
    keep = order[: comp.k]
    out[keep] = x[keep]
    return out


def quantize(quant: UnbiasedQuantizer, x: np.ndarray, rng: RngStream) -> np.ndarray:
    """Apply an unbiased quantizer using the caller's stream.

    A zero input returns zero without consuming any randomness.
    """
    if quant.kind == "identity":
        return x.copy()
    d = x.shape[0]
    quant._check_dim(d)
    if not np.any(x):
        return np.zeros_like(x)
    if quant.kind == "randk":
        idx = rng.choice_without_replacement(d, quant.k)
        out = np.zeros_like(x)
        out[idx] = (d / quant.k) * x[idx]
        return out
    # lp-dithering: ||x||_p * sign(x) * Bernoulli(|x_i| / ||x||_p)
    ax = np.abs(x)
    norm = float(np.linalg.norm(x)) if quant.p == "l2" else float(ax.max())
    probs = ax / norm
    xi = rng.random(d) < probs
    out = np.where(xi, norm * np.sign(x), 0.0)
    return np.asarray(out, dtype=x.dtype)


def bit_cost(op, d: int, float_bits: int = 64) -> int:
    """Bits for one transmission of a d-vector under the declared encoding.

    TopK/RandK send k (index, value) pairs; dithering sends one float plus a
    ternary symbol per coordinate; identity sends the dense vector.  The
    encoding is an artifact convention with configurable float width.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    index_bits = math.ceil(math.log2(d)) if d > 1 else 0
    if isinstance(op, ContractiveCompressor):
        if op.kind == "identity":
            return d * float_bits
        return op.k * (float_bits + index_bits)
    if isinstance(op, UnbiasedQuantizer):
        if op.kind == "identity":
            return d * float_bits
        if op.kind == "randk":
            return op.k * (float_bits + index_bits)
        return float_bits + math.ceil(d * math.log2(3.0))
    raise TypeError(f"not an operator: {op!r}")
