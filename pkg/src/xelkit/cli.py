"""Command-line front-end.

Subcommands:

* ``build-index``: parse a dump, build the title map / anchors / mention
  table, write the index file.
* ``link``: generate and rank candidates for every dataset mention,
  writing one JSON result per line.
* ``evaluate``: score a results file against its dataset and render the
  metric table.
* ``coverage``: report mention token coverage (and the recall/coverage
  ratio when results are supplied).

Exit codes: 0 ok, 1 data error, 2 usage error, 3 provider/transient
error. Every ``link`` flag can also be given through ``--config`` (JSON
with underscored keys); explicit flags win over the config file.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import evaluate as ev
from .candidates import GenConfig, generate
from .normalize import RuleSet, RulesError, load_rules
from .providers import (
    CachedSearchProvider,
    FixtureGeoProvider,
    FixtureSearchProvider,
    LiveSearchProvider,
    Providers,
    TransientProviderError,
)
from .ranking import (
    ContextBundle,
    extract_mention_sentence,
    make_embedder,
    rank_and_select,
    split_sentences,
)
from .wikidump import (
    DumpFormatError,
    IndexFormatError,
    build_prtm,
    build_title_map,
    collect_anchors,
    load_index,
    parse_dump,
    save_index,
)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_PROVIDER = 3


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Linking run configuration; mirrors the ``link`` flags one-to-one."""

    lang: str = ""
    index: str = ""
    dataset: str = ""
    out: str = ""
    rules: str = ""
    search_fixture: str = ""
    geo_fixture: str = ""
    live_search_url: str = ""
    cache: str = ""
    summaries: str = ""
    k: int = 1
    no_search: bool = False
    no_map: bool = False
    no_prtm: bool = False
    no_pivot: bool = True
    augment: str = "none"
    country: str = ""
    pivot_langs: str = ""
    script_blocks: str = ""
    max_candidates: int = 16
    embedder: str = "builtin"
    context: str = "raw"
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def gen_config(self) -> GenConfig:
        return GenConfig(
            k=self.k,
            use_search=not self.no_search,
            use_map=not self.no_map,
            use_prtm=not self.no_prtm,
            use_pivot=not self.no_pivot,
            augment=self.augment,
            pivot_langs=tuple(x for x in self.pivot_langs.split(",") if x),
            script_blocks=parse_script_blocks(self.script_blocks),
            max_candidates=self.max_candidates,
        )


def parse_script_blocks(spec: str) -> tuple:
    """Parse ``0B00-0B7F:0900-097F[,...]`` into block-pair tuples."""
    if not spec:
        return ()
    pairs = []
    for part in spec.split(","):
        try:
            frm, to = part.split(":")
            f0, f1 = (int(x, 16) for x in frm.split("-"))
            t0, t1 = (int(x, 16) for x in to.split("-"))
        except ValueError:
            raise UsageError(f"bad script block spec: {part!r}") from None
        pairs.append(((f0, f1), (t0, t1)))
    return tuple(pairs)


def _require(path: str, what: str) -> Path:
    if not path:
        raise UsageError(f"missing required {what}")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _load_lang_rules(rules_path: str, lang: str) -> RuleSet | None:
    if not rules_path:
        return None
    return load_rules(_require(rules_path, "rules file")).get(lang)


def cmd_build_index(args: argparse.Namespace) -> int:
    dump_path = _require(args.dump, "dump path")
    rules = _load_lang_rules(args.rules, args.lang)
    pages = list(parse_dump(dump_path, lang=None, fmt="xml" if args.xml else "tinydump"))
    sl_pages = [p for p in pages if p.lang == args.lang]
    en_pages = [p for p in pages if p.lang == "en"]
    titles = build_title_map(sl_pages, en_pages if en_pages else None)
    anchors = collect_anchors(sl_pages, rules)
    table = build_prtm(anchors, titles, sl_pages, rules)
    save_index(table, titles, anchors, args.out)
    print(f"pages: {len(pages)}")
    print(f"title map entries: {len(titles)}")
    print(f"prtm rows: {len(table)}")
    return EXIT_OK


def _build_providers(cfg: RunConfig) -> Providers:
    search = None
    if cfg.search_fixture:
        search = FixtureSearchProvider(_require(cfg.search_fixture, "search fixture"))
    elif cfg.live_search_url:
        search = LiveSearchProvider(cfg.live_search_url)
    if search is not None and cfg.cache:
        search = CachedSearchProvider(search, cfg.cache)
    geo = FixtureGeoProvider(_require(cfg.geo_fixture, "geo fixture")) if cfg.geo_fixture else None
    return Providers(search=search, geo=geo)


def _load_summaries(path: str) -> dict[str, list[str]]:
    if not path:
        return {}
    with open(_require(path, "summaries file"), encoding="utf-8") as fh:
        raw = json.load(fh)
    out: dict[str, list[str]] = {}
    for entity, value in raw.items():
        if isinstance(value, str):
            out[entity] = split_sentences(value)
        else:
            out[entity] = [str(s) for s in value]
    return out


def _merge_link_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        with open(_require(args.config, "config file"), encoding="utf-8") as fh:
            cfg = RunConfig.from_dict({**cfg.to_dict(), **json.load(fh)})
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    return cfg


def _link_one(mention, table, titles, providers, gcfg, rules, country, summaries, embedder, context_mode):
    notes: list[str] = []
    cands = generate(
        mention, table, titles, providers, gcfg,
        rules=rules, country=country or None, notes=notes,
    )
    if cands:
        ctx = ContextBundle(
            mention_sentence=extract_mention_sentence(mention.sentence, mention.surface),
            candidate_summaries={c.entity: summaries.get(c.entity, []) for c in cands},
        )
        selected, ranked = rank_and_select(cands, mention, ctx, embedder, context_mode)
        ordered = [s.candidate.entity for s in ranked]
        source_map = {
            s.candidate.entity: sorted(src.value for src in s.candidate.sources) for s in ranked
        }
        scores = {s.candidate.entity: s.w for s in ranked}
    else:
        selected, ordered, source_map, scores = None, [], {}, {}
    return {
        "doc_id": mention.doc_id,
        "surface": mention.surface,
        "type": mention.entity_type,
        "gold": mention.gold,
        "candidates": ordered,
        "selected": selected,
        "sources": source_map,
        "scores": scores,
        "notes": notes,
    }


def cmd_link(args: argparse.Namespace) -> int:
    cfg = _merge_link_config(args)
    if not cfg.out:
        raise UsageError("missing required --out path")
    if cfg.augment == "country" and not cfg.country:
        raise UsageError("--augment country requires --country")
    try:
        gcfg = cfg.gen_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table, titles, _anchors = load_index(_require(cfg.index, "index file"))
    mentions = ev.load_dataset(_require(cfg.dataset, "dataset file"))
    rules = _load_lang_rules(cfg.rules, cfg.lang)
    providers = _build_providers(cfg)
    summaries = _load_summaries(cfg.summaries)
    embedder = make_embedder(cfg.embedder)

    def work(mention):
        return _link_one(
            mention, table, titles, providers, gcfg,
            rules, cfg.country, summaries, embedder, cfg.context,
        )

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(work, mentions))
    else:
        records = [work(m) for m in mentions]

    with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"linked {len(records)} mentions -> {cfg.out}")
    return EXIT_OK


def _load_results(path: Path, mentions: list[ev.MentionRecord]) -> list[ev.LinkResult]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if raw.strip():
                try:
                    rows.append(json.loads(raw))
                except json.JSONDecodeError as exc:
                    raise ev.DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from None
    if len(rows) != len(mentions):
        raise ev.DatasetError(
            f"results hold {len(rows)} records but dataset has {len(mentions)} mentions"
        )
    results = []
    for row, mention in zip(rows, mentions):
        if row.get("doc_id") != mention.doc_id or row.get("surface") != mention.surface:
            raise ev.DatasetError(
                f"results/dataset mismatch at doc {row.get('doc_id')!r} vs {mention.doc_id!r}"
            )
        results.append(ev.LinkResult(mention=mention, candidates=list(row["candidates"]),
                                     selected=row["selected"]))
    return results


def cmd_evaluate(args: argparse.Namespace) -> int:
    mentions = ev.load_dataset(_require(args.dataset, "dataset file"))
    results = _load_results(_require(args.results, "results file"), mentions)
    ks = [int(x) for x in args.recall_k.split(",") if x]
    report = ev.build_report(results, recall_ks=ks)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(ev.render_report(report, per_type=args.per_type))
    return EXIT_OK


def cmd_coverage(args: argparse.Namespace) -> int:
    _table, titles, anchors = load_index(_require(args.index, "index file"))
    mentions = ev.load_dataset(_require(args.dataset, "dataset file"))
    rules = _load_lang_rules(args.rules, args.lang)
    coverage = ev.mention_token_coverage(mentions, titles, anchors, rules)
    print(f"mention token coverage: {coverage:.4f}")
    if args.results:
        results = _load_results(_require(args.results, "results file"), mentions)
        recall = ev.gold_candidate_recall(results)
        ratio = ev.coverage_ratio(recall, coverage)
        print(f"gold candidate recall: {recall:.4f}")
        print(f"recall/coverage ratio: {ratio:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xelkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="build title map, anchors, and mention table")
    p.add_argument("--dump", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rules", default="")
    p.add_argument("--xml", action="store_true", help="read a MediaWiki XML export")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("link", help="generate and rank candidates for a dataset")
    p.add_argument("--config", default="", help="JSON config mirroring these flags")
    p.add_argument("--lang", default=None)
    p.add_argument("--index", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--rules", default=None)
    p.add_argument("--search-fixture", dest="search_fixture", default=None)
    p.add_argument("--geo-fixture", dest="geo_fixture", default=None)
    p.add_argument("--live-search-url", dest="live_search_url", default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--summaries", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--no-search", dest="no_search", action="store_const", const=True, default=None)
    p.add_argument("--no-map", dest="no_map", action="store_const", const=True, default=None)
    p.add_argument("--no-prtm", dest="no_prtm", action="store_const", const=True, default=None)
    p.add_argument("--no-pivot", dest="no_pivot", action="store_const", const=True, default=None)
    p.add_argument("--pivot", dest="no_pivot", action="store_const", const=False,
                   help="enable query-based pivoting")
    p.add_argument("--augment", choices=["none", "wiki", "country"], default=None)
    p.add_argument("--country", default=None)
    p.add_argument("--pivot-langs", dest="pivot_langs", default=None,
                   help="comma-separated language codes")
    p.add_argument("--script-blocks", dest="script_blocks", default=None,
                   help="hex ranges, e.g. 0B00-0B7F:0900-097F")
    p.add_argument("--max-candidates", dest="max_candidates", type=int, default=None)
    p.add_argument("--embedder", default=None, help="builtin or external:<host>:<port>")
    p.add_argument("--context", choices=["raw", "shifted"], default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("evaluate", help="score a results file against its dataset")
    p.add_argument("--results", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default="")
    p.add_argument("--per-type", dest="per_type", action="store_true")
    p.add_argument("--recall-k", dest="recall_k", default="1,5")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("coverage", help="mention token coverage analysis")
    p.add_argument("--index", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--results", default="")
    p.add_argument("--lang", default="")
    p.add_argument("--rules", default="")
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransientProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (DumpFormatError, IndexFormatError, RulesError, ev.DatasetError,
            ev.EmptyResultsError, ZeroDivisionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
