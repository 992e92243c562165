"""Dataset loading and linking metrics.

Datasets are JSONL, one object per mention:

    {"doc_id": ..., "surface": ..., "sentence": ..., "type": "GPE|LOC|PER|ORG",
     "gold": "<English title>" | null}

Metrics follow the usual candidate-generation evaluation scheme: gold
candidate recall (gold entity anywhere in the candidate list), recall at
a cutoff k, end-to-end linking accuracy (selected == gold), mention token
coverage against interlanguage-linked titles and anchors, the
recall/coverage ratio, and per-entity-type accuracy. Mentions whose gold
is NIL are excluded from recall and accuracy denominators.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .normalize import RuleSet, normalize
from .wikidump import AnchorStat, TitleMap

ENTITY_TYPES = ("GPE", "LOC", "PER", "ORG")
NIL = None


class DatasetError(ValueError):
    """Schema violation in a dataset file; message names the line."""


class EmptyResultsError(ValueError):
    """Metrics over zero linkable mentions are undefined."""


@dataclass(frozen=True)
class MentionRecord:
    """One dataset mention."""

    doc_id: str
    surface: str
    sentence: str
    entity_type: str
    gold: str | None

    def __post_init__(self) -> None:
        if self.entity_type not in ENTITY_TYPES:
            raise DatasetError(f"unknown entity type {self.entity_type!r}")
        if self.surface not in self.sentence:
            raise DatasetError(f"surface {self.surface!r} not found in its sentence")


@dataclass
class LinkResult:
    """Ranked output for one mention: ordered candidates and the pick."""

    mention: MentionRecord
    candidates: list[str]
    selected: str | None

    def __post_init__(self) -> None:
        if self.selected is not None and self.selected not in self.candidates:
            raise ValueError(f"selected {self.selected!r} not among candidates")


@dataclass
class EvalReport:
    n_mentions: int
    gold_candidate_recall: float
    recall_at: dict[int, float]
    linking_accuracy: float
    per_type_accuracy: dict[str, float]
    mention_token_coverage: float | None = None
    coverage_ratio: float | None = None

    def to_dict(self) -> dict:
        return {
            "n_mentions": self.n_mentions,
            "gold_candidate_recall": self.gold_candidate_recall,
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "linking_accuracy": self.linking_accuracy,
            "per_type_accuracy": dict(sorted(self.per_type_accuracy.items())),
            "mention_token_coverage": self.mention_token_coverage,
            "coverage_ratio": self.coverage_ratio,
        }


def load_dataset(path: str | Path) -> list[MentionRecord]:
    """Read and validate a JSONL dataset."""
    records: list[MentionRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                record = MentionRecord(
                    doc_id=str(obj["doc_id"]),
                    surface=str(obj["surface"]),
                    sentence=str(obj["sentence"]),
                    entity_type=str(obj["type"]),
                    gold=obj["gold"] if obj["gold"] is None else str(obj["gold"]),
                )
            except KeyError as exc:
                raise DatasetError(f"{path}:{lineno}: missing field {exc}") from None
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            records.append(record)
    return records


def _linkable(results: Iterable[LinkResult]) -> list[LinkResult]:
    linkable = [r for r in results if r.mention.gold is not None]
    if not linkable:
        raise EmptyResultsError("no linkable (non-NIL gold) mentions")
    return linkable


def gold_candidate_recall(results: list[LinkResult]) -> float:
    """Fraction of linkable mentions whose gold entity is among candidates."""
    linkable = _linkable(results)
    hits = sum(1 for r in linkable if r.mention.gold in r.candidates)
    return hits / len(linkable)


def recall_at_k(results: list[LinkResult], k: int) -> float:
    """Gold candidate recall with candidate lists truncated to the top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    linkable = _linkable(results)
    hits = sum(1 for r in linkable if r.mention.gold in r.candidates[:k])
    return hits / len(linkable)


def linking_accuracy(results: list[LinkResult]) -> float:
    """Fraction of linkable mentions whose selected entity equals gold."""
    linkable = _linkable(results)
    hits = sum(1 for r in linkable if r.selected == r.mention.gold)
    return hits / len(linkable)


def mention_token_coverage(
    mentions: list[MentionRecord],
    titles: TitleMap,
    anchors: Iterable[AnchorStat],
    rules: RuleSet | None = None,
) -> float:
    """Fraction of mentions sharing a token with linked titles or anchors.

    The covered-token pool is built from title-map keys and from anchor
    surfaces whose target resolves through an interlanguage link; mention
    surfaces (and titles) are normalized before whitespace tokenization.
    """
    if not mentions:
        raise EmptyResultsError("no mentions")
    pool: set[str] = set()
    for sl_title in titles.entries:
        pool.update(normalize(sl_title, rules).split())
    for a in anchors:
        if a.sl_target in titles:
            pool.update(a.surface.split())
    covered = 0
    for m in mentions:
        tokens = normalize(m.surface, rules).split()
        if any(t in pool for t in tokens):
            covered += 1
    return covered / len(mentions)


def coverage_ratio(recall: float, coverage: float) -> float:
    """Gold candidate recall divided by mention token coverage."""
    if coverage == 0:
        raise ZeroDivisionError("coverage is zero; ratio undefined")
    return recall / coverage


def per_type_accuracy(results: list[LinkResult]) -> dict[str, float]:
    """Linking accuracy restricted to each entity type present."""
    out: dict[str, float] = {}
    for etype in ENTITY_TYPES:
        subset = [r for r in results if r.mention.entity_type == etype and r.mention.gold is not None]
        if subset:
            out[etype] = sum(1 for r in subset if r.selected == r.mention.gold) / len(subset)
    return out


def build_report(
    results: list[LinkResult],
    recall_ks: Iterable[int] = (1, 5),
    coverage: float | None = None,
) -> EvalReport:
    recall = gold_candidate_recall(results)
    report = EvalReport(
        n_mentions=len(results),
        gold_candidate_recall=recall,
        recall_at={k: recall_at_k(results, k) for k in recall_ks},
        linking_accuracy=linking_accuracy(results),
        per_type_accuracy=per_type_accuracy(results),
        mention_token_coverage=coverage,
        coverage_ratio=coverage_ratio(recall, coverage) if coverage else None,
    )
    return report


def render_report(report: EvalReport, per_type: bool = False) -> str:
    """Aligned-column text rendering: Accu / Rec@k / Rec@n."""
    headers = ["Accu"] + [f"Rec@{k}" for k in sorted(report.recall_at)] + ["Rec@n"]
    values = [report.linking_accuracy]
    values += [report.recall_at[k] for k in sorted(report.recall_at)]
    values.append(report.gold_candidate_recall)
    rows = [headers, [f"{v * 100:.1f}" for v in values]]
    if per_type:
        for etype, acc in sorted(report.per_type_accuracy.items()):
            rows.append([etype, f"{acc * 100:.1f}"])
    if report.mention_token_coverage is not None:
        rows.append(["coverage", f"{report.mention_token_coverage * 100:.1f}"])
        if report.coverage_ratio is not None:
            rows.append(["ratio", f"{report.coverage_ratio:.2f}"])
    widths = [max(len(str(r[i])) for r in rows if i < len(r)) for i in range(max(len(r) for r in rows))]
    lines = []
    for row in rows:
        lines.append("  ".join(str(cell).rjust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)
