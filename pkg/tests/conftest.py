import json
from pathlib import Path

import pytest

from xelkit.evaluate import load_dataset
from xelkit.normalize import load_rules
from xelkit.providers import FixtureGeoProvider, FixtureSearchProvider, Providers
from xelkit.wikidump import build_prtm, build_title_map, collect_anchors, parse_dump

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def om_rules():
    return load_rules(DATA / "rules.txt")["om"]


@pytest.fixture(scope="session")
def corpus_pages():
    return list(parse_dump(DATA / "corpus.dump"))


@pytest.fixture(scope="session")
def index_artifacts(corpus_pages, om_rules):
    sl = [p for p in corpus_pages if p.lang == "om"]
    en = [p for p in corpus_pages if p.lang == "en"]
    titles = build_title_map(sl, en)
    anchors = collect_anchors(sl, om_rules)
    table = build_prtm(anchors, titles, sl, om_rules)
    return table, titles, anchors


@pytest.fixture(scope="session")
def fixture_providers():
    return Providers(
        search=FixtureSearchProvider(DATA / "search.json"),
        geo=FixtureGeoProvider(DATA / "geo.json"),
    )


@pytest.fixture(scope="session")
def mentions():
    return load_dataset(DATA / "mentions.jsonl")


@pytest.fixture(scope="session")
def summaries():
    with open(DATA / "summaries.json", encoding="utf-8") as fh:
        return json.load(fh)
