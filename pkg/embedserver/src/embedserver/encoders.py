"""Sentence encoders behind the embedding service.

The default encoder hashes character 4-grams into a fixed 384-dim bag
and L2-normalizes; it is deterministic across runs and platforms and
needs no model files. A real multilingual encoder can be selected with
``st:<model-name>`` when sentence-transformers and the model weights
are available locally.
"""
from __future__ import annotations

import hashlib

import numpy as np

HASH_DIM = 384
_SALT = b"embedserver-4g"


class HashEncoder:
    """Deterministic hashed character 4-gram encoder."""

    name = "hash-v1"
    dim = HASH_DIM

    def encode(self, unit: str, sentence: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        if not unit and not sentence:
            return vec
        text = f"{unit}‖{sentence}"
        grams = [text[i:i + 4] for i in range(len(text) - 3)] if len(text) >= 4 else [text]
        for gram in grams:
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, salt=_SALT).digest()
            vec[int.from_bytes(digest, "big") % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class SentenceTransformerEncoder:
    """Mean-pooled transformer encoder; requires local model weights."""

    def __init__(self, model_name: str):
        from sentence_transformers import SentenceTransformer

        self.name = model_name
        self._model = SentenceTransformer(model_name, device="cpu")
        self._model.eval()
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, unit: str, sentence: str) -> np.ndarray:
        text = f"{unit} {sentence}".strip()
        return np.asarray(
            self._model.encode([text], convert_to_numpy=True, show_progress_bar=False)[0],
            dtype=np.float64,
        )


def make_encoder(selector: str):
    """``hash`` (default) or ``st:<model-name>``."""
    if selector == "hash":
        return HashEncoder()
    if selector.startswith("st:"):
        return SentenceTransformerEncoder(selector[3:])
    raise ValueError(f"unknown encoder selector: {selector!r}")
