"""Zero-shot candidate ranking.

Each candidate is scored as W = W_source * W_context, where W_source is
the number of sources that generated the candidate and W_context is the
cosine similarity between the mention's contextual embedding and the
candidate's. Ties are broken by source priority (search > map > pivot >
table), then best search rank, then title. The embedder is pluggable: a
deterministic built-in hashing embedder keeps the toolkit self-contained,
and an external service can be attached over a newline-delimited JSON
socket protocol.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import re
import socket
import threading
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol, Sequence

import numpy as np

from .candidates import Candidate

if TYPE_CHECKING:
    from .evaluate import MentionRecord

BUILTIN_DIM = 256
SENTENCE_DELIMITERS = ".?!।።"

_HASH_SALT = b"xelkit-3gram"


class NoCandidatesError(ValueError):
    """Raised when ranking is asked to select from an empty list."""


class Embedder(Protocol):
    """Contextual embedder: deterministic, fixed output dimension."""

    def embed(self, unit: str, sentence: str) -> np.ndarray: ...


@dataclass
class ContextBundle:
    """Ranking context: the mention's sentence plus candidate summaries."""

    mention_sentence: str
    candidate_summaries: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for entity, sentences in self.candidate_summaries.items():
            if any(not s for s in sentences):
                raise ValueError(f"empty summary sentence for {entity!r}")


@dataclass
class ScoredCandidate:
    candidate: Candidate
    w_source: int
    w_context: float
    w: float


def builtin_embed(unit: str, sentence: str) -> np.ndarray:
    """Reference embedder: hashed character 3-grams, L2-normalized.

    256-dim bag of 3-grams over ``unit + '‖' + sentence`` with a fixed
    hash salt; deterministic across runs and platforms. Only the empty
    input embeds to the zero vector.
    """
    vec = np.zeros(BUILTIN_DIM, dtype=np.float64)
    if not unit and not sentence:
        return vec
    text = f"{unit}‖{sentence}"
    grams = [text[i:i + 3] for i in range(len(text) - 2)] if len(text) >= 3 else [text]
    for gram in grams:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, salt=_HASH_SALT).digest()
        vec[int.from_bytes(digest, "big") % BUILTIN_DIM] += 1.0
    return vec / np.linalg.norm(vec)


class BuiltinEmbedder:
    """Embedder wrapper around builtin_embed."""

    dim = BUILTIN_DIM

    def embed(self, unit: str, sentence: str) -> np.ndarray:
        return builtin_embed(unit, sentence)


class ExternalEmbedder:
    """Client for an embedding service speaking the NDJSON wire protocol.

    Requests are ``{"id", "unit", "sentence"}``, responses carry the same
    id and a ``vector`` array. The connection is used single-flight; calls
    are serialized with a lock so the embedder is safe to share.
    """

    def __init__(self, address: str, timeout: float = 30.0):
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"external embedder address must be host:port, got {address!r}")
        self._sock = socket.create_connection((host, int(port)), timeout=timeout)
        self._fh = self._sock.makefile("rw", encoding="utf-8", newline="\n")
        self._lock = threading.Lock()
        self._ids = itertools.count(1)

    def _roundtrip(self, request: dict) -> dict:
        with self._lock:
            self._fh.write(json.dumps(request, ensure_ascii=False) + "\n")
            self._fh.flush()
            line = self._fh.readline()
        if not line:
            raise ConnectionError("embedding service closed the connection")
        return json.loads(line)

    def health(self) -> dict:
        return self._roundtrip({"op": "health"})

    def embed(self, unit: str, sentence: str) -> np.ndarray:
        rid = str(next(self._ids))
        resp = self._roundtrip({"id": rid, "unit": unit, "sentence": sentence})
        if resp.get("error"):
            raise RuntimeError(f"embedding service error: {resp['error']}")
        if resp.get("id") != rid:
            raise RuntimeError(f"embedding service answered id {resp.get('id')!r} to request {rid!r}")
        return np.asarray(resp["vector"], dtype=np.float64)

    def close(self) -> None:
        self._fh.close()
        self._sock.close()


def make_embedder(selector: str) -> Embedder:
    """Build an embedder from a CLI-style selector.

    ``builtin`` or ``external:<host>:<port>``.
    """
    if selector == "builtin":
        return BuiltinEmbedder()
    if selector.startswith("external:"):
        return ExternalEmbedder(selector[len("external:"):])
    raise ValueError(f"unknown embedder selector: {selector!r}")


def split_sentences(text: str, delimiters: str = SENTENCE_DELIMITERS) -> list[str]:
    """Split text into sentences on delimiter + whitespace boundaries."""
    parts = re.split(f"(?<=[{re.escape(delimiters)}])\\s+", text.strip())
    return [p.strip() for p in parts if p.strip()]


def extract_mention_sentence(text: str, surface: str, delimiters: str = SENTENCE_DELIMITERS) -> str:
    """The sentence of ``text`` containing the mention surface.

    Falls back to the whole text when no single sentence contains it.
    """
    for sentence in split_sentences(text, delimiters):
        if surface in sentence:
            return sentence
    return " ".join(text.split())


def multiplicity_weight(c: Candidate) -> int:
    """Number of sources that generated the candidate."""
    if not c.sources:
        raise ValueError("candidate has no sources")
    return len(c.sources)


def embed_candidate(e: Embedder, entity: str, summary: list[str]) -> np.ndarray:
    """Average embedding of the summary sentences mentioning the entity.

    Sentences are selected by case-insensitive substring match on the
    entity surface; when none match, all summary sentences are averaged;
    when the summary is empty, the entity embeds against itself.
    """
    selected = [s for s in summary if entity.lower() in s.lower()]
    if not selected:
        selected = list(summary)
    if not selected:
        return np.asarray(e.embed(entity, entity), dtype=np.float64)
    vectors = [np.asarray(e.embed(entity, s), dtype=np.float64) for s in selected]
    return np.mean(vectors, axis=0)


def context_score(v_m: Sequence[float], v_c: Sequence[float]) -> float:
    """Cosine similarity; zero vectors score 0."""
    a = np.asarray(v_m, dtype=np.float64)
    b = np.asarray(v_c, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"embedding dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _tie_key(s: ScoredCandidate) -> tuple:
    best_source = min(src.priority for src in s.candidate.sources)
    rank = s.candidate.best_rank if s.candidate.best_rank is not None else float("inf")
    return (-s.w, best_source, rank, s.candidate.entity)


def rank_scored(scored: list[ScoredCandidate]) -> list[ScoredCandidate]:
    """Total deterministic order: score desc, then the tie-break chain."""
    return sorted(scored, key=_tie_key)


def score_candidates(
    cands: list[Candidate],
    v_m: np.ndarray,
    ctx: ContextBundle,
    e: Embedder,
    context_mode: str = "raw",
) -> list[ScoredCandidate]:
    scored = []
    for c in cands:
        w_context = context_score(v_m, embed_candidate(e, c.entity, ctx.candidate_summaries.get(c.entity, [])))
        if context_mode == "shifted":
            w_context = (1.0 + w_context) / 2.0
        w_source = multiplicity_weight(c)
        scored.append(ScoredCandidate(c, w_source, w_context, w_source * w_context))
    return scored


def rank_and_select(
    cands: list[Candidate],
    m: "MentionRecord",
    ctx: ContextBundle,
    e: Embedder,
    context_mode: str = "raw",
) -> tuple[str, list[ScoredCandidate]]:
    """Pick the best-scoring candidate for a mention.

    Returns the selected English title and the full scored list, sorted
    by descending score. Raising on an empty candidate list lets the
    caller record a NIL link.
    """
    if not cands:
        raise NoCandidatesError(f"no candidates for mention {m.surface!r}")
    if context_mode not in ("raw", "shifted"):
        raise ValueError(f"unknown context mode: {context_mode!r}")
    v_m = np.asarray(e.embed(m.surface, ctx.mention_sentence), dtype=np.float64)
    ranked = rank_scored(score_candidates(cands, v_m, ctx, e, context_mode))
    return ranked[0].candidate.entity, ranked
