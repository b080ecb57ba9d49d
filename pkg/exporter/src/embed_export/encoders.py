"""Sentence encoders behind one small interface.

Two backends: a deterministic offline hash encoder (no model weights,
useful for tests and plumbing checks) and an adapter for any
sentence-transformers checkpoint. Encoders are frozen: same text, same
vector, always.
"""

from __future__ import annotations

import hashlib
import math
import random

from embed_export.errors import EncoderError, UsageError


class Encoder:
    """Interface: `name` identifies the resolved encoder (including its
    version where one exists), `dim` is the output width, and
    `encode_batch` maps texts to vectors of exactly that width."""

    name: str
    dim: int

    def encode_batch(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


class HashEncoder(Encoder):
    """Unit vector seeded by the sha256 of the text. Deterministic across
    processes and platforms; carries no semantics."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise UsageError(f"encoder dim must be positive, got {dim}")
        self.dim = dim
        self.name = f"hash-sha256-d{dim}"

    def _encode_one(self, text: str) -> list[float]:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        vector = [rng.gauss(0.0, 1.0) for _ in range(self.dim)]
        norm = math.sqrt(sum(v * v for v in vector))
        return [v / norm for v in vector]

    def encode_batch(self, texts: list[str]) -> list[list[float]]:
        return [self._encode_one(text) for text in texts]


class SentenceTransformerEncoder(Encoder):
    """Adapter for a sentence-transformers checkpoint named by the job."""

    def __init__(self, model_name: str, device: str | None = None):
        try:
            import sentence_transformers
        except ImportError:
            raise EncoderError(
                "encoder backend 'sentence-transformers' is not installed; "
                "install the [st] extra or use the 'hash' encoder"
            ) from None
        try:
            self._model = sentence_transformers.SentenceTransformer(model_name, device=device)
        except Exception as exc:
            raise EncoderError(f"cannot load encoder {model_name!r}: {exc}") from None
        self.dim = int(self._model.get_sentence_embedding_dimension())
        # record the resolved library version alongside the checkpoint name
        self.name = f"{model_name} [sentence-transformers {sentence_transformers.__version__}]"

    def encode_batch(self, texts: list[str]) -> list[list[float]]:
        vectors = self._model.encode(texts, convert_to_numpy=True, show_progress_bar=False)
        return [[float(v) for v in row] for row in vectors]


def get_encoder(identifier: str, device: str | None = None) -> Encoder:
    """Encoder from a free-text identifier.

    "hash" or "hash:<dim>" selects the offline hash encoder; anything
    else is treated as a sentence-transformers checkpoint name.
    """
    if identifier == "hash":
        return HashEncoder()
    if identifier.startswith("hash:"):
        try:
            dim = int(identifier.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad hash encoder dim in {identifier!r}") from None
        return HashEncoder(dim)
    return SentenceTransformerEncoder(identifier, device=device)
