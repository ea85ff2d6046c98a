"""Text embeddings for ontology features.

The default engine hashes character 3-grams into ``d`` signed buckets, which
is offline and reproducible across processes. An external HTTP provider can
be configured through ``EMBED_ENDPOINT`` / ``EMBED_KEY``; its failures fall
back to hashing unless the policy forbids it.
"""
from __future__ import annotations

import hashlib
import logging
import os
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_WIDTH = 256
HASH_SEED = b"monrec-3gram-v1"


class EmbeddingTransportError(RuntimeError):
    pass


def _trigrams(text: str) -> list[str]:
    t = " ".join(text.lower().split())
    if not t:
        return []
    t = f"  {t} "
    return [t[i:i + 3] for i in range(len(t) - 2)]


def _bucket(gram: str, width: int) -> tuple[int, float]:
    h = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=HASH_SEED).digest()
    v = int.from_bytes(h, "little")
    return v % width, (1.0 if (v >> 63) & 1 else -1.0)


def hashed_embedding(text: str, width: int = DEFAULT_WIDTH) -> np.ndarray:
    vec = np.zeros(width)
    for gram in _trigrams(text):
        idx, sign = _bucket(gram, width)
        vec[idx] += sign
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


@dataclass
class EmbeddingProvider:
    """Embedding engine with a content-hash cache.

    ``mode`` is ``"hashed"`` or ``"external"``. In external mode the client
    posts ``{"model": ..., "texts": [...]}`` and expects ``{"vectors": [...]}``.
    """

    width: int = DEFAULT_WIDTH
    mode: str = "hashed"
    endpoint: str | None = None
    api_key: str | None = None
    model: str = "text-embedding"
    timeout: float = 30.0
    allow_fallback: bool = True
    _cache: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def from_env(cls, width: int = DEFAULT_WIDTH, **kwargs) -> "EmbeddingProvider":
        endpoint = os.environ.get("EMBED_ENDPOINT")
        if endpoint:
            return cls(width=width, mode="external", endpoint=endpoint,
                       api_key=os.environ.get("EMBED_KEY"), **kwargs)
        return cls(width=width, **kwargs)

    def _key(self, text: str) -> str:
        return hashlib.sha256(f"{self.mode}\0{self.model}\0{text}".encode("utf-8")).hexdigest()

    def embed_text(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[np.ndarray | None] = [None] * len(texts)
        missing: list[int] = []
        with self._lock:
            for i, t in enumerate(texts):
                hit = self._cache.get(self._key(t))
                if hit is not None:
                    out[i] = hit
                elif not t.strip():
                    out[i] = np.zeros(self.width)
                else:
                    missing.append(i)
        if missing:
            fresh = self._compute([texts[i] for i in missing])
            with self._lock:
                for i, vec in zip(missing, fresh):
                    vec.setflags(write=False)
                    self._cache[self._key(texts[i])] = vec
                    out[i] = vec
        return out  # type: ignore[return-value]

    def _compute(self, texts: list[str]) -> list[np.ndarray]:
        if self.mode == "external":
            try:
                return self._remote(texts)
            except EmbeddingTransportError:
                if not self.allow_fallback:
                    raise
                log.warning("embedding provider failed, using hashed fallback for %d texts", len(texts))
        return [hashed_embedding(t, self.width) for t in texts]

    def _remote(self, texts: list[str]) -> list[np.ndarray]:
        import requests

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = requests.post(self.endpoint, json={"model": self.model, "texts": texts},
                                 headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except Exception as exc:  # transport, HTTP status and shape problems alike
            raise EmbeddingTransportError(f"embedding request failed: {exc}") from exc
        if len(vectors) != len(texts):
            raise EmbeddingTransportError(f"provider returned {len(vectors)} vectors for {len(texts)} texts")
        result = []
        for v in vectors:
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (self.width,):
                raise EmbeddingTransportError(f"provider vector width {v.shape} != {self.width}")
            n = np.linalg.norm(v)
            result.append(v / n if n > 0 else v)
        return result


def embed_set(vectors: Iterable[np.ndarray], width: int | None = None) -> np.ndarray:
    """Mean pooling of a set of vectors; the empty set maps to zeros."""
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    if not vectors:
        if width is None:
            raise ValueError("empty set needs an explicit width")
        return np.zeros(width)
    w = vectors[0].shape
    for v in vectors:
        if v.shape != w:
            raise ValueError(f"width mismatch in embed_set: {v.shape} vs {w}")
        if width is not None and v.shape != (width,):
            raise ValueError(f"width mismatch in embed_set: {v.shape} vs ({width},)")
    return np.mean(vectors, axis=0)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"cosine of vectors with widths {u.shape} and {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
