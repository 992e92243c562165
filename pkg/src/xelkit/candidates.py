"""Candidate generation for foreign-language mentions.

English Wikipedia candidates for a mention come from up to four sources:

* SearchTop: search the normalized (optionally augmented) mention, keep
  the top-k Wikipedia page results, and resolve them to English titles
  through the title map.
* MapSearch: for geopolitical/location mentions, ask a geo provider for
  the English surface of the place, then re-search that surface through
  the standard search path.
* Pivot: re-search Wikipedia hits that landed in a configured pivot
  language (one hop), and optionally re-search a script-converted form
  of the mention.
* PrTM: exact lookup in the probabilistic mention table.

Candidates for the same entity are merged with their source sets
unioned; the merged list is ordered deterministically (search rank
first, then map, pivot, table probability) and capped.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING
from urllib.parse import unquote, urlsplit

from .normalize import RuleSet, normalize
from .providers import Providers, SearchResult, TransientProviderError
from .wikidump import PrTable, TitleMap

if TYPE_CHECKING:
    from .evaluate import MentionRecord

_WIKI_HOST_RE = re.compile(r"^([a-z][a-z0-9-]*)\.wikipedia\.org$")
_NON_LANG_HOSTS = {"www", "m", "meta", "commons", "species", "incubator"}
_GEO_TYPES = {"GPE", "LOC"}
_INF = float("inf")


class Source(Enum):
    """Where a candidate came from; order is the tie-break priority."""

    SEARCH_TOP = "SearchTop"
    MAP_SEARCH = "MapSearch"
    PIVOT = "Pivot"
    PRTM = "PrTM"
    TRANSLATION = "Translation"

    @property
    def priority(self) -> int:
        return list(Source).index(self)


@dataclass(frozen=True)
class WikiPageHit:
    """A search result recognized as a Wikipedia page."""

    lang: str
    page_title: str
    rank: int


@dataclass
class Candidate:
    """An English-entity hypothesis with the sources that produced it."""

    entity: str
    sources: set[Source]
    prtm_prob: float | None = None
    best_rank: int | None = None

    def __post_init__(self) -> None:
        if not self.entity:
            raise ValueError("candidate entity must be non-empty")
        if not self.sources:
            raise ValueError("candidate must have at least one source")


@dataclass(frozen=True)
class GenConfig:
    """Candidate-generation switches (the ablation surface).

    ``script_blocks`` holds pairs of equal-length Unicode ranges,
    ((from_start, from_end), (to_start, to_end)), code points inclusive.
    """

    k: int = 1
    use_search: bool = True
    use_map: bool = True
    use_prtm: bool = True
    use_pivot: bool = False
    augment: str = "none"
    pivot_langs: tuple[str, ...] = ()
    script_blocks: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()
    max_candidates: int = 16

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.augment not in ("none", "wiki", "country"):
            raise ValueError(f"unknown augment mode: {self.augment!r}")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        for (f0, f1), (t0, t1) in self.script_blocks:
            if f1 - f0 != t1 - t0:
                raise ValueError(f"script block pair has unequal lengths: {(f0, f1)} vs {(t0, t1)}")


def make_query(mention: str, cfg: GenConfig, country: str | None = None) -> str:
    """Build the search query for a normalized mention, per cfg.augment."""
    if not mention:
        raise ValueError("mention must be non-empty")
    if cfg.augment == "wiki":
        return f"{mention} wiki"
    if cfg.augment == "country":
        if not country:
            raise ValueError("augment mode 'country' requires a country name")
        return f"{mention} {country}"
    return mention


def filter_wiki_pages(results: list[SearchResult], k: int) -> list[WikiPageHit]:
    """Keep the first k results that are Wikipedia article pages.

    Host must be ``<lang>.wikipedia.org`` and the path must start with
    ``/wiki/``; the page title is the percent-decoded path remainder with
    underscores turned into spaces. Input order (rank order) is kept.
    """
    hits: list[WikiPageHit] = []
    for r in results:
        if len(hits) >= k:
            break
        parts = urlsplit(r.url)
        m = _WIKI_HOST_RE.match(parts.netloc.lower())
        if not m or m.group(1) in _NON_LANG_HOSTS:
            continue
        if not parts.path.startswith("/wiki/"):
            continue
        title = unquote(parts.path[len("/wiki/"):]).replace("_", " ").strip()
        if not title:
            continue
        hits.append(WikiPageHit(lang=m.group(1), page_title=title, rank=r.rank))
    return hits


def resolve_to_english(hit: WikiPageHit, titles: TitleMap) -> str | None:
    """English title for a Wikipedia hit, if one exists.

    English hits resolve to themselves; source-language hits resolve
    through the title map; anything else is dropped.
    """
    if hit.lang == "en":
        return hit.page_title
    return titles.get(hit.page_title)


def map_candidates(provider, mention: str) -> str | None:
    """English surface of a geo mention, or None when the provider has none.

    Provider failures raise (transient errors are distinct from a missing
    entry); the caller re-searches a returned surface via the search path.
    """
    return provider.lookup(mention)


def script_pivot(surface: str, blocks: tuple[tuple[tuple[int, int], tuple[int, int]], ...]) -> str:
    """Shift code points from one Unicode block into another.

    Characters outside every from-block pass through unchanged.
    """
    if not blocks:
        return surface
    out: list[str] = []
    for ch in surface:
        cp = ord(ch)
        for (f0, f1), (t0, _t1) in blocks:
            if f0 <= cp <= f1:
                cp = cp + (t0 - f0)
                break
        out.append(chr(cp))
    return "".join(out)


def pivot_candidates(
    hits: list[WikiPageHit],
    cfg: GenConfig,
    provider,
    titles: TitleMap,
) -> list[Candidate]:
    """One pivot hop: re-search pivot-language hits by their page title.

    Only hits whose language is in cfg.pivot_langs (and not English) are
    followed; candidates produced by the re-search carry source Pivot and
    are not pivoted again.
    """
    out: list[Candidate] = []
    for hit in hits:
        if hit.lang == "en" or hit.lang not in cfg.pivot_langs:
            continue
        pivot_hits = filter_wiki_pages(provider.search(make_query(hit.page_title, cfg)), cfg.k)
        for ph in pivot_hits:
            entity = resolve_to_english(ph, titles)
            if entity is not None:
                out.append(Candidate(entity=entity, sources={Source.PIVOT}, best_rank=ph.rank))
    return out


def _merge(into: dict[str, Candidate], new: Candidate) -> None:
    cur = into.get(new.entity)
    if cur is None:
        into[new.entity] = new
        return
    cur.sources |= new.sources
    if new.prtm_prob is not None:
        cur.prtm_prob = new.prtm_prob
    if new.best_rank is not None and (cur.best_rank is None or new.best_rank < cur.best_rank):
        cur.best_rank = new.best_rank


def _order_key(c: Candidate) -> tuple:
    cls = min(s.priority for s in c.sources)
    return (
        cls,
        c.best_rank if c.best_rank is not None else _INF,
        -(c.prtm_prob or 0.0),
        c.entity,
    )


class _TrackedSearch:
    """Records whether any call to the wrapped search provider succeeded."""

    def __init__(self, inner):
        self.inner = inner
        self.used = False
        self.succeeded = False

    def search(self, query: str) -> list[SearchResult]:
        self.used = True
        results = self.inner.search(query)
        self.succeeded = True
        return results


def generate(
    mention: "MentionRecord",
    table: PrTable,
    titles: TitleMap,
    providers: Providers,
    cfg: GenConfig,
    rules: RuleSet | None = None,
    country: str | None = None,
    notes: list[str] | None = None,
) -> list[Candidate]:
    """Generate the merged candidate list for one mention.

    Per-source transient failures are recorded in ``notes`` and the
    remaining sources still contribute; only when every provider touched
    during the call failed does the whole call raise
    TransientProviderError.
    """
    if notes is None:
        notes = []
    surface = normalize(mention.surface, rules)
    merged: dict[str, Candidate] = {}
    search = _TrackedSearch(providers.search) if providers.search is not None else None
    geo_used = False
    geo_succeeded = False

    def searched_hits(query_surface: str) -> list[WikiPageHit]:
        query = make_query(query_surface, cfg, country)
        return filter_wiki_pages(search.search(query), cfg.k)

    hits: list[WikiPageHit] = []
    if search is not None and (cfg.use_search or cfg.use_pivot):
        try:
            hits = searched_hits(surface)
        except TransientProviderError as exc:
            notes.append(f"search: {exc}")
    if cfg.use_search:
        for hit in hits:
            entity = resolve_to_english(hit, titles)
            if entity is not None:
                _merge(merged, Candidate(entity, {Source.SEARCH_TOP}, best_rank=hit.rank))

    if cfg.use_map and providers.geo is not None and search is not None \
            and mention.entity_type in _GEO_TYPES:
        try:
            geo_used = True
            en_surface = map_candidates(providers.geo, surface)
            geo_succeeded = True
            if en_surface:
                for hit in searched_hits(en_surface):
                    entity = resolve_to_english(hit, titles)
                    if entity is not None:
                        _merge(merged, Candidate(entity, {Source.MAP_SEARCH}, best_rank=hit.rank))
        except TransientProviderError as exc:
            notes.append(f"map: {exc}")

    if cfg.use_pivot and search is not None:
        try:
            for cand in pivot_candidates(hits, cfg, search, titles):
                _merge(merged, cand)
            if cfg.script_blocks:
                converted = script_pivot(surface, cfg.script_blocks)
                if converted != surface:
                    for hit in searched_hits(converted):
                        entity = resolve_to_english(hit, titles)
                        if entity is not None:
                            _merge(merged, Candidate(entity, {Source.PIVOT}, best_rank=hit.rank))
        except TransientProviderError as exc:
            notes.append(f"pivot: {exc}")

    if cfg.use_prtm:
        for entity, prob in table.candidates(surface):
            _merge(merged, Candidate(entity, {Source.PRTM}, prtm_prob=prob))

    search_used = search.used if search is not None else False
    search_ok = search.succeeded if search is not None else False
    any_used = search_used or geo_used
    any_ok = (search_used and search_ok) or (geo_used and geo_succeeded)
    if any_used and not any_ok:
        raise TransientProviderError(
            f"all providers failed for {mention.surface!r}: {'; '.join(notes)}"
        )
    ordered = sorted(merged.values(), key=_order_key)
    return ordered[: cfg.max_candidates]
