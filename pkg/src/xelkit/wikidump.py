"""Wiki dump ingestion and mention-table construction.

Builds three resources from a dump:

* a title map (source-language title -> English title, via interlanguage
  links, with one level of redirect resolution),
* anchor statistics (clickable link surface -> source-language target,
  with occurrence counts),
* a probabilistic mention table mapping normalized mention surfaces to
  English entities, with probabilities proportional to total counts.

The canonical ingestion format is TinyDump, a UTF-8 line format:

    page\t<lang>\t<title>      starts a new page
    ill\t<lang>=<title>        interlanguage link on the current page
    redirect\t<title>          marks the current page as a redirect
    text\t<wikitext>           wikitext line (may repeat; joined with \\n)

Wikitext links use ``[[Target]]`` / ``[[Target|anchor]]`` syntax. A real
MediaWiki XML export can be read through the same contract via
``parse_dump(..., fmt="xml")``.
"""
from __future__ import annotations

import hashlib
import io
import logging
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .normalize import RuleSet, normalize

logger = logging.getLogger(__name__)

INDEX_MAGIC = "#xelkit-index-v1"
PRTM_HEADER = "#prtm-v1"

_LINK_RE = re.compile(r"\[\[([^\[\]|]+)(?:\|([^\[\]|]*))?\]\]")
_INTERLANG_TARGET_RE = re.compile(r"[a-z]{2,3}(?:-[a-z]+)?:.+")
_XML_NS = re.compile(r"\{[^}]*\}")


class DumpFormatError(ValueError):
    """Malformed dump input; message carries the offending line number."""


class DuplicateTitleError(DumpFormatError):
    """Two pages claim the same (lang, title)."""


class IndexFormatError(ValueError):
    """Index file is unreadable: bad version, bad section, or bad checksum."""


@dataclass
class Page:
    """One dump page: title, language, wikitext, links."""

    title: str
    lang: str
    wikitext: str = ""
    interlang_targets: dict[str, str] = field(default_factory=dict)
    redirect_target: str | None = None

    def anchors(self) -> Counter[tuple[str, str]]:
        """Occurrence counts of (anchor surface, link target) in the wikitext.

        Plain ``[[Target]]`` links count the target title as their own
        surface. Redirect pages expose no anchors, and interlanguage-shaped
        targets (``xx:Title``) are not anchors.
        """
        counts: Counter[tuple[str, str]] = Counter()
        if self.redirect_target is not None:
            return counts
        for m in _LINK_RE.finditer(self.wikitext):
            target = m.group(1).strip()
            surface = (m.group(2) or "").strip() or target
            if _INTERLANG_TARGET_RE.fullmatch(target):
                continue
            if target and surface:
                counts[(surface, target)] += 1
        return counts


@dataclass(frozen=True)
class AnchorStat:
    """Aggregated anchor occurrence: normalized surface -> SL target title."""

    surface: str
    sl_target: str
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"anchor count must be >= 1, got {self.count}")


class TitleMap:
    """Function from source-language titles to English titles."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries: dict[str, str] = dict(entries or {})

    def get(self, sl_title: str) -> str | None:
        return self.entries.get(sl_title)

    def __contains__(self, sl_title: str) -> bool:
        return sl_title in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TitleMap) and self.entries == other.entries


class PrTable:
    """Probabilistic mention -> English entity table.

    Rows are derived from raw (mention, entity) counts; per-mention
    probabilities are count/total, sorted by descending probability with
    lexicographic tie order. The table is immutable once built and safe
    for concurrent reads.
    """

    def __init__(self, counts: dict[str, dict[str, int]]):
        self._counts = {m: dict(ents) for m, ents in counts.items() if ents}
        self.rows: dict[str, list[tuple[str, float]]] = {}
        for mention in sorted(self._counts):
            ents = self._counts[mention]
            total = sum(ents.values())
            row = [(entity, ents[entity] / total) for entity in ents]
            row.sort(key=lambda ep: (-ep[1], ep[0]))
            self.rows[mention] = row

    def candidates(self, mention: str) -> list[tuple[str, float]]:
        """Exact-key lookup of a normalized mention; [] when absent."""
        return list(self.rows.get(mention, []))

    def counts(self) -> dict[str, dict[str, int]]:
        return {m: dict(e) for m, e in self._counts.items()}

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PrTable) and self.rows == other.rows and self._counts == other._counts


def _to_text_stream(stream: IO[bytes] | IO[str] | str | Path) -> IO[str]:
    if isinstance(stream, (str, Path)):
        return open(stream, encoding="utf-8")
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8")


def parse_dump(
    stream: IO[bytes] | IO[str] | str | Path,
    lang: str | None = None,
    fmt: str = "tinydump",
) -> Iterator[Page]:
    """Yield every page of a dump exactly once.

    ``lang`` restricts the yielded pages to one language (a TinyDump may
    carry several, e.g. source-language and English pages side by side);
    pages of other languages are still parsed and validated. ``fmt`` is
    ``tinydump`` or ``xml``.
    """
    if fmt == "tinydump":
        pages = _parse_tinydump(_to_text_stream(stream))
    elif fmt == "xml":
        pages = _parse_xml(stream, lang or "")
    else:
        raise ValueError(f"unknown dump format: {fmt!r}")

    seen: set[tuple[str, str]] = set()
    for page in pages:
        key = (page.lang, page.title)
        if key in seen:
            raise DuplicateTitleError(f"duplicate title {page.title!r} in language {page.lang!r}")
        seen.add(key)
        if lang is None or page.lang == lang:
            yield page


def _parse_tinydump(fh: IO[str]) -> Iterator[Page]:
    page: Page | None = None
    text_lines: list[str] = []

    for lineno, raw in enumerate(fh, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        kind = fields[0]
        if kind == "page":
            if len(fields) != 3 or not fields[1] or not fields[2]:
                raise DumpFormatError(f"line {lineno}: bad page record: {line!r}")
            if page is not None:
                page.wikitext = "\n".join(text_lines)
                yield page
            page = Page(title=fields[2], lang=fields[1])
            text_lines = []
        elif kind == "ill":
            if page is None or len(fields) != 2 or "=" not in fields[1]:
                raise DumpFormatError(f"line {lineno}: bad ill record: {line!r}")
            target_lang, _, target_title = fields[1].partition("=")
            if not target_lang or not target_title:
                raise DumpFormatError(f"line {lineno}: bad ill record: {line!r}")
            page.interlang_targets[target_lang] = target_title
        elif kind == "redirect":
            if page is None or len(fields) != 2 or not fields[1]:
                raise DumpFormatError(f"line {lineno}: bad redirect record: {line!r}")
            page.redirect_target = fields[1]
        elif kind == "text":
            if page is None or len(fields) < 2:
                raise DumpFormatError(f"line {lineno}: bad text record: {line!r}")
            text_lines.append("\t".join(fields[1:]))
        else:
            raise DumpFormatError(f"line {lineno}: unknown record type {kind!r}")
    if page is not None:
        page.wikitext = "\n".join(text_lines)
        yield page


def _parse_xml(stream: IO[bytes] | IO[str] | str | Path, lang: str) -> Iterator[Page]:
    """Minimal MediaWiki-export front-end behind the parse_dump contract.

    Reads <page><title> and revision <text>; redirects come from the
    <redirect title=...> element, interlanguage links from ``[[xx:Title]]``
    wikitext links where xx is a known-shaped language code.
    """
    if isinstance(stream, (str, Path)):
        ctx = ET.iterparse(str(stream), events=("end",))
    else:
        ctx = ET.iterparse(stream, events=("end",))
    for _, elem in ctx:
        tag = _XML_NS.sub("", elem.tag)
        if tag != "page":
            continue
        title = None
        text = ""
        redirect = None
        for child in elem.iter():
            ctag = _XML_NS.sub("", child.tag)
            if ctag == "title" and title is None:
                title = child.text or ""
            elif ctag == "redirect":
                redirect = child.get("title")
            elif ctag == "text":
                text = child.text or ""
        if not title:
            raise DumpFormatError("XML page element without title")
        page = Page(title=title, lang=lang, wikitext=text, redirect_target=redirect)
        for m in _LINK_RE.finditer(text):
            target = m.group(1).strip()
            if _INTERLANG_TARGET_RE.fullmatch(target):
                code, _, t = target.partition(":")
                page.interlang_targets.setdefault(code, t.strip())
        yield page
        elem.clear()


def build_title_map(
    sl_pages: Iterable[Page],
    en_pages: Iterable[Page] | None = None,
) -> TitleMap:
    """Map SL titles to English titles via interlanguage links.

    Redirect titles are resolved exactly one level: a redirect to a page
    with an ``en`` target inherits that target; longer chains are dropped
    (counted in the log). When ``en_pages`` is supplied, entries whose
    English target is not in that page set are dropped.
    """
    pages = list(sl_pages)
    langs = {p.lang for p in pages}
    if len(langs) > 1:
        raise ValueError(f"pages span several languages: {sorted(langs)}")
    by_title: dict[str, Page] = {}
    for p in pages:
        if p.title in by_title:
            raise DuplicateTitleError(f"duplicate title {p.title!r} in language {p.lang!r}")
        by_title[p.title] = p

    entries: dict[str, str] = {}
    for p in pages:
        if p.redirect_target is None and "en" in p.interlang_targets:
            entries[p.title] = p.interlang_targets["en"]

    dropped_chains = 0
    for p in pages:
        if p.redirect_target is None:
            continue
        target = by_title.get(p.redirect_target)
        if target is None or target.redirect_target is not None:
            dropped_chains += 1
            continue
        if "en" in target.interlang_targets:
            entries[p.title] = target.interlang_targets["en"]
    if dropped_chains:
        logger.warning("dropped %d redirect chains deeper than one level", dropped_chains)

    if en_pages is not None:
        en_titles = {p.title for p in en_pages}
        missing = {sl for sl, en in entries.items() if en not in en_titles}
        if missing:
            logger.warning("dropped %d title-map entries with no English page", len(missing))
        entries = {sl: en for sl, en in entries.items() if sl not in missing}
    return TitleMap(entries)


def collect_anchors(pages: Iterable[Page], rules: RuleSet | None = None) -> list[AnchorStat]:
    """Aggregate anchor statistics over pages, normalizing surfaces.

    Page order does not affect the result: counts are summed and the
    output is sorted by (surface, target).
    """
    counts: Counter[tuple[str, str]] = Counter()
    for page in pages:
        for (surface, target), n in page.anchors().items():
            counts[(normalize(surface, rules), target)] += n
    return [
        AnchorStat(surface=s, sl_target=t, count=c)
        for (s, t), c in sorted(counts.items())
    ]


def build_prtm(
    anchors: Iterable[AnchorStat],
    titles: TitleMap,
    sl_pages: Iterable[Page] | None = None,
    rules: RuleSet | None = None,
) -> PrTable:
    """Build the probabilistic mention table from anchors plus title map.

    Every title-map key is also inserted as a mention surface for itself
    (count 1). Anchors whose SL target has no English mapping are dropped;
    such mentions simply return no (or fewer) entities.
    """
    counts: dict[str, dict[str, int]] = {}

    def add(mention: str, entity: str, n: int) -> None:
        counts.setdefault(mention, {})
        counts[mention][entity] = counts[mention].get(entity, 0) + n

    for sl_title, en_title in titles.entries.items():
        add(normalize(sl_title, rules), en_title, 1)
    for a in anchors:
        en_title = titles.get(a.sl_target)
        if en_title is None:
            continue
        add(a.surface, en_title, a.count)
    return PrTable(counts)


def prtm_candidates(table: PrTable, mention: str) -> list[tuple[str, float]]:
    """Look up a normalized mention in the table."""
    return table.candidates(mention)


def _check_field(value: str) -> str:
    if "\t" in value or "\n" in value:
        raise IndexFormatError(f"field contains tab or newline: {value!r}")
    return value


def save_index(
    table: PrTable,
    titles: TitleMap,
    anchors: Iterable[AnchorStat],
    path: str | Path,
) -> None:
    """Write table, title map, and anchors to one checksummed index file.

    Sections are sorted before writing, so logically equal inputs produce
    byte-identical files.
    """
    anchor_list = sorted(anchors, key=lambda a: (a.surface, a.sl_target))
    lines: list[str] = [INDEX_MAGIC]
    lines.append("#titles")
    for sl in sorted(titles.entries):
        lines.append(f"{_check_field(sl)}\t{_check_field(titles.entries[sl])}")
    lines.append("#anchors")
    for a in anchor_list:
        lines.append(f"{_check_field(a.surface)}\t{_check_field(a.sl_target)}\t{a.count}")
    lines.append(PRTM_HEADER)
    counts = table.counts()
    for mention in sorted(counts):
        for entity in sorted(counts[mention]):
            lines.append(f"{_check_field(mention)}\t{_check_field(entity)}\t{counts[mention][entity]}")
    payload = "\n".join(lines) + "\n"
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    Path(path).write_text(payload + f"#checksum {digest}\n", encoding="utf-8")


def load_index(path: str | Path) -> tuple[PrTable, TitleMap, list[AnchorStat]]:
    """Read an index file back; inverse of save_index."""
    raw = Path(path).read_text(encoding="utf-8")
    lines = raw.splitlines()
    if not lines or lines[0] != INDEX_MAGIC:
        raise IndexFormatError(f"{path}: not a {INDEX_MAGIC} index")
    if not lines[-1].startswith("#checksum "):
        raise IndexFormatError(f"{path}: missing checksum (truncated file?)")
    stated = lines[-1].split(" ", 1)[1]
    payload = "\n".join(lines[:-1]) + "\n"
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    if digest != stated:
        raise IndexFormatError(f"{path}: checksum mismatch")

    section = None
    titles: dict[str, str] = {}
    anchors: list[AnchorStat] = []
    counts: dict[str, dict[str, int]] = {}
    for lineno, line in enumerate(lines[1:-1], start=2):
        if line in ("#titles", "#anchors", PRTM_HEADER):
            section = line
            continue
        fields = line.split("\t")
        try:
            if section == "#titles" and len(fields) == 2:
                titles[fields[0]] = fields[1]
            elif section == "#anchors" and len(fields) == 3:
                anchors.append(AnchorStat(fields[0], fields[1], int(fields[2])))
            elif section == PRTM_HEADER and len(fields) == 3:
                counts.setdefault(fields[0], {})[fields[1]] = int(fields[2])
            else:
                raise ValueError
        except ValueError:
            raise IndexFormatError(f"{path}:{lineno}: bad index line: {line!r}") from None
    return PrTable(counts), TitleMap(titles), anchors
