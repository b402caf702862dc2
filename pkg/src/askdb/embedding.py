"""Question embedding.

Two backends behind one config: a deterministic hashing embedder that needs no
network or model weights, and a thin HTTP client for a hosted embedding API.
The hashing backend is the default everywhere reproducibility matters (tests,
benchmarks, CI); the external backend exists for deployments that want real
semantic vectors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from hashlib import blake2b
from typing import Sequence

import httpx

DEFAULT_DIM = 256
MIN_DIM = 8

# Tokens are maximal runs of alphanumeric characters; underscore is a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmbeddingError(Exception):
    """Base class for embedding failures."""


class EmbeddingTransportError(EmbeddingError):
    """The external embedding endpoint was unreachable, timed out, or returned non-2xx."""


class EmbeddingContractError(EmbeddingError):
    """The external endpoint answered, but the payload violated the expected shape."""


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-dimension vector of finite floats.

    Vectors produced by the hashing backend are either L2-normalized or all
    zeros (empty input); externally produced vectors are stored as-is.
    """

    values: tuple[float, ...]
    dim: int

    def __post_init__(self) -> None:
        if len(self.values) != self.dim:
            raise ValueError(
                f"vector has {len(self.values)} values but dim={self.dim}"
            )
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError("vector values must be finite")

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


@dataclass(frozen=True)
class EmbedderConfig:
    """Selects and parameterizes an embedding backend.

    backend is "reference" (hashing, default) or "external". The external
    backend requires both endpoint and model_name.
    """

    backend: str = "reference"
    dim: int = DEFAULT_DIM
    endpoint: str | None = None
    model_name: str | None = None
    timeout_s: float = 10.0

    def __post_init__(self) -> None:
        if self.backend not in ("reference", "external"):
            raise ValueError(f"unknown embedding backend: {self.backend!r}")
        if self.dim < MIN_DIM:
            raise ValueError(f"dim must be >= {MIN_DIM}, got {self.dim}")
        if self.backend == "external" and not (self.endpoint and self.model_name):
            raise ValueError("external backend requires endpoint and model_name")


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _token_slot(token: str, dim: int) -> tuple[int, float]:
    """Map a token to a stable (index, sign) pair.

    Index comes from a 64-bit keyless hash mod dim; sign comes from the parity
    of a second, domain-separated hash so the two are independent.
    """
    index_digest = blake2b(token.encode("utf-8"), digest_size=8).digest()
    sign_digest = blake2b(token.encode("utf-8"), digest_size=8, person=b"sign").digest()
    index = int.from_bytes(index_digest, "little") % dim
    sign = 1.0 if sign_digest[0] % 2 == 0 else -1.0
    return index, sign


def _reference_embed(text: str, dim: int) -> EmbeddingVector:
    acc = [0.0] * dim
    for token in _tokenize(text):
        index, sign = _token_slot(token, dim)
        acc[index] += sign
    norm = math.sqrt(sum(v * v for v in acc))
    if norm == 0.0:
        return EmbeddingVector(values=tuple(acc), dim=dim)
    return EmbeddingVector(values=tuple(v / norm for v in acc), dim=dim)


class ExternalEmbeddingClient:
    """HTTP client for a hosted embedding API.

    Request: POST endpoint with {"model": ..., "input": [texts]}.
    Response: {"data": [{"embedding": [...]}, ...]} in input order.
    A transport kwarg is accepted so tests can inject httpx.MockTransport.
    """

    def __init__(self, config: EmbedderConfig, transport: httpx.BaseTransport | None = None):
        if config.backend != "external":
            raise ValueError("ExternalEmbeddingClient requires an external backend config")
        self._config = config
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def close(self) -> None:
        self._client.close()

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        cfg = self._config
        try:
            response = self._client.post(
                cfg.endpoint,  # type: ignore[arg-type]  # validated non-None in config
                json={"model": cfg.model_name, "input": list(texts)},
            )
        except httpx.HTTPError as exc:
            raise EmbeddingTransportError(f"embedding endpoint unreachable: {exc}") from exc
        if response.status_code // 100 != 2:
            raise EmbeddingTransportError(
                f"embedding endpoint returned HTTP {response.status_code}"
            )
        try:
            payload = response.json()
            items = payload["data"]
            vectors = [tuple(float(v) for v in item["embedding"]) for item in items]
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingContractError(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise EmbeddingContractError(
                f"asked for {len(texts)} embeddings, got {len(vectors)}"
            )
        out = []
        for vec in vectors:
            if len(vec) != cfg.dim:
                raise EmbeddingContractError(
                    f"endpoint returned dimension {len(vec)}, configured dim is {cfg.dim}"
                )
            out.append(EmbeddingVector(values=vec, dim=cfg.dim))
        return out


def embed_text(text: str, config: EmbedderConfig | None = None) -> EmbeddingVector:
    """Embed one text. Empty or whitespace-only text yields the zero vector."""
    cfg = config or EmbedderConfig()
    if cfg.backend == "reference":
        return _reference_embed(text, cfg.dim)
    client = ExternalEmbeddingClient(cfg)
    try:
        return client.embed_batch([text])[0]
    finally:
        client.close()


def embed_batch(texts: Sequence[str], config: EmbedderConfig | None = None) -> list[EmbeddingVector]:
    """Embed many texts; order of results matches input order."""
    cfg = config or EmbedderConfig()
    if cfg.backend == "reference":
        return [_reference_embed(t, cfg.dim) for t in texts]
    client = ExternalEmbeddingClient(cfg)
    try:
        return client.embed_batch(texts)
    finally:
        client.close()


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity, with the convention that any zero vector scores 0.0."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    norm_a = a.norm()
    norm_b = b.norm()
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return dot / (norm_a * norm_b)


class Embedder:
    """Immutable convenience wrapper binding a config to the embed functions.

    Safe to share across threads: reference embedding is a pure function and
    the external path opens a fresh connection per call.
    """

    def __init__(self, config: EmbedderConfig | None = None):
        self.config = config or EmbedderConfig()

    @property
    def dim(self) -> int:
        return self.config.dim

    def embed(self, text: str) -> EmbeddingVector:
        return embed_text(text, self.config)

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return embed_batch(texts, self.config)
