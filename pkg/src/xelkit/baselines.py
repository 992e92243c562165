"""Word-translation baseline for method-wise comparison.

A fixed word-to-word translation table is induced from bilingual title
pairs: titles with equal token counts align positionally, others fall
back to uniform all-to-all alignment with fractional counts. At lookup
time every mention token is translated by its top-scoring entry and the
joined translation is emitted only when it exactly matches an English
title. Mentions with any out-of-table token produce no candidates,
which is the characteristic failure mode of this family of systems.
"""
from __future__ import annotations

from collections import defaultdict

from .candidates import Candidate, Source


class TransTable:
    """Token translation table with per-token normalized scores."""

    def __init__(self, scores: dict[str, list[tuple[str, float]]]):
        self.entries = scores

    def top(self, token: str) -> str | None:
        row = self.entries.get(token)
        return row[0][0] if row else None

    def __len__(self) -> int:
        return len(self.entries)


def build_translation_table(title_pairs: list[tuple[str, str]]) -> TransTable:
    """Induce the token table from (SL title, EN title) pairs."""
    counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
    for sl_title, en_title in title_pairs:
        sl_tokens = sl_title.split()
        en_tokens = en_title.split()
        if not sl_tokens or not en_tokens:
            continue
        if len(sl_tokens) == len(en_tokens):
            for s, t in zip(sl_tokens, en_tokens):
                counts[s][t] += 1.0
        else:
            weight = 1.0 / len(en_tokens)
            for s in sl_tokens:
                for t in en_tokens:
                    counts[s][t] += weight
    scores: dict[str, list[tuple[str, float]]] = {}
    for token, targets in counts.items():
        total = sum(targets.values())
        row = [(t, c / total) for t, c in targets.items()]
        row.sort(key=lambda tc: (-tc[1], tc[0]))
        scores[token] = row
    return TransTable(scores)


def translation_candidates(
    table: TransTable,
    mention: str,
    en_title_set: set[str],
) -> list[Candidate]:
    """Token-by-token translation gated on exact English-title match."""
    translated: list[str] = []
    for token in mention.split():
        top = table.top(token)
        if top is None:
            return []
        translated.append(top)
    joined = " ".join(translated)
    if joined not in en_title_set:
        return []
    return [Candidate(entity=joined, sources={Source.TRANSLATION})]
