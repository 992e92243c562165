"""Language-configurable morphological normalization for mention surfaces.

Surfaces are NFC-normalized and whitespace-collapsed, then run through an
ordered rule set (prefix strips, suffix strips, replacements). Rule sets are
plain data loaded from a text file, one rule per line:

    suffix <lang> <string>
    prefix <lang> <string>
    replace <lang> <from> <to>

Lines starting with ``#`` are comments. All lines for one language must form
a contiguous block.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from pathlib import Path

# Rewriting passes are bounded so a pathological replacement rule cannot
# loop forever; well-formed rule files converge in one or two passes.
_MAX_PASSES = 25


class RulesError(ValueError):
    """Raised for unparseable or duplicated rule definitions."""


@dataclass(frozen=True)
class RuleSet:
    """Ordered normalization rules for one language."""

    lang: str
    strip_suffixes: tuple[str, ...] = ()
    strip_prefixes: tuple[str, ...] = ()
    replacements: tuple[tuple[str, str], ...] = ()


EMPTY_RULES = RuleSet(lang="")


def _collapse_whitespace(s: str) -> str:
    return " ".join(s.split())


def _strip_once(s: str, prefixes: tuple[str, ...], suffixes: tuple[str, ...]) -> str:
    # Longest match first; at most one prefix and one suffix per pass.
    for p in sorted(prefixes, key=len, reverse=True):
        if p and s.startswith(p) and len(s) > len(p):
            s = s[len(p):]
            break
    for suf in sorted(suffixes, key=len, reverse=True):
        if suf and s.endswith(suf) and len(s) > len(suf):
            s = s[: -len(suf)]
            break
    return s


def normalize(surface: str, rules: RuleSet | None = None) -> str:
    """Normalize a mention surface: NFC, whitespace collapse, then rules.

    Never returns an empty string for non-empty input; if rule application
    (or collapse) would empty the string, the pre-rule form is returned.
    """
    nfc = unicodedata.normalize("NFC", surface)
    s = _collapse_whitespace(nfc)
    if not s:
        return nfc
    if rules is None:
        return s

    pre_rule = s
    for _ in range(_MAX_PASSES):
        prev = s
        s = _strip_once(s, rules.strip_prefixes, rules.strip_suffixes)
        for frm, to in rules.replacements:
            if frm:
                s = s.replace(frm, to)
        s = _collapse_whitespace(unicodedata.normalize("NFC", s))
        if s == prev:
            break
    return s if s else pre_rule


def load_rules(path: str | Path) -> dict[str, RuleSet]:
    """Parse a rules file into per-language RuleSets.

    Each language's lines must be contiguous; a language reappearing after
    another one started is treated as a duplicate block.
    """
    suffixes: dict[str, list[str]] = {}
    prefixes: dict[str, list[str]] = {}
    replacements: dict[str, list[tuple[str, str]]] = {}
    closed: set[str] = set()
    current: str | None = None

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            kind = parts[0]
            if kind in ("suffix", "prefix") and len(parts) == 3:
                lang, arg = parts[1], parts[2]
            elif kind == "replace" and len(parts) == 4:
                lang, arg = parts[1], (parts[2], parts[3])
            else:
                raise RulesError(f"{path}:{lineno}: unparseable rule line: {line!r}")

            if lang != current:
                if lang in closed:
                    raise RulesError(f"{path}:{lineno}: duplicate block for language {lang!r}")
                if current is not None:
                    closed.add(current)
                current = lang
            if kind == "suffix":
                suffixes.setdefault(lang, []).append(arg)
            elif kind == "prefix":
                prefixes.setdefault(lang, []).append(arg)
            else:
                replacements.setdefault(lang, []).append(arg)

    out: dict[str, RuleSet] = {}
    for lang in dict.fromkeys([*suffixes, *prefixes, *replacements]):
        out[lang] = RuleSet(
            lang=lang,
            strip_suffixes=tuple(suffixes.get(lang, [])),
            strip_prefixes=tuple(prefixes.get(lang, [])),
            replacements=tuple(replacements.get(lang, [])),
        )
    return out
