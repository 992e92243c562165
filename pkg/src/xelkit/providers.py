"""Search and geocoding providers: fixtures, an on-disk cache, and an
optional live HTTP client.

All tests and offline runs use fixture providers backed by JSON files;
live providers are opt-in and never contacted by default. Cache entries
live under ``<cache_dir>/<provider>/<sha256(query)>.json`` and store the
raw result list for a query.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests


class ProviderError(RuntimeError):
    """Permanent provider failure (bad config, unusable response)."""


class TransientProviderError(ProviderError):
    """Timeouts and other retryable failures; distinct from 'no result'."""


@dataclass(frozen=True)
class SearchResult:
    """One ranked web result (rank 1 = best)."""

    url: str
    title: str
    rank: int


class SearchProvider(Protocol):
    provider_id: str

    def search(self, query: str) -> list[SearchResult]: ...


class GeoProvider(Protocol):
    provider_id: str

    def lookup(self, mention: str) -> str | None: ...


def _validate_results(results: list[SearchResult], query: str) -> list[SearchResult]:
    ranks = [r.rank for r in results]
    if len(set(ranks)) != len(ranks):
        raise ProviderError(f"duplicate ranks in results for {query!r}")
    return sorted(results, key=lambda r: r.rank)


class FixtureSearchProvider:
    """Search results served from a JSON file: query -> [{url,title,rank}]."""

    def __init__(self, path: str | Path, provider_id: str = "fixture"):
        self.provider_id = provider_id
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        self._table: dict[str, list[SearchResult]] = {}
        for query, results in raw.items():
            self._table[query] = _validate_results(
                [SearchResult(r["url"], r.get("title", ""), int(r["rank"])) for r in results],
                query,
            )

    def search(self, query: str) -> list[SearchResult]:
        return list(self._table.get(query, []))


class FixtureGeoProvider:
    """Geo lookups from a JSON file: mention -> English surface (or null)."""

    def __init__(self, path: str | Path, provider_id: str = "geo-fixture"):
        self.provider_id = provider_id
        with open(path, encoding="utf-8") as fh:
            self._table: dict[str, str | None] = json.load(fh)

    def lookup(self, mention: str) -> str | None:
        return self._table.get(mention)


class LiveSearchProvider:
    """Plain HTTP GET search client; the URL template holds ``{query}``.

    The endpoint must answer with a JSON array of {url,title,rank}
    objects. Network and HTTP errors surface as transient failures.
    """

    def __init__(
        self,
        url_template: str,
        provider_id: str = "live",
        timeout: float = 10.0,
        fetch: Callable[..., requests.Response] = requests.get,
    ):
        self.provider_id = provider_id
        self.url_template = url_template
        self.timeout = timeout
        self._fetch = fetch

    def search(self, query: str) -> list[SearchResult]:
        url = self.url_template.format(query=requests.utils.quote(query))
        try:
            resp = self._fetch(url, timeout=self.timeout)
            resp.raise_for_status()
            raw = resp.json()
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise TransientProviderError(f"search for {query!r} failed: {exc}") from exc
        except (requests.RequestException, ValueError) as exc:
            raise ProviderError(f"search for {query!r} failed: {exc}") from exc
        return _validate_results(
            [SearchResult(r["url"], r.get("title", ""), int(r["rank"])) for r in raw],
            query,
        )


class CachedSearchProvider:
    """File cache in front of another search provider.

    Reads may happen concurrently; writes go through a same-directory
    temp file and an atomic rename.
    """

    def __init__(self, inner: SearchProvider, cache_dir: str | Path):
        self.inner = inner
        self.provider_id = inner.provider_id
        self.cache_dir = Path(cache_dir) / inner.provider_id
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, query: str) -> Path:
        digest = hashlib.sha256(query.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def search(self, query: str) -> list[SearchResult]:
        path = self._path(query)
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
            return [SearchResult(r["url"], r["title"], int(r["rank"])) for r in entry["results"]]
        results = self.inner.search(query)
        payload = {
            "query": query,
            "results": [{"url": r.url, "title": r.title, "rank": r.rank} for r in results],
        }
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, ensure_ascii=False)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        return results


@dataclass
class Providers:
    """Provider bundle handed to candidate generation."""

    search: SearchProvider | None = None
    geo: GeoProvider | None = None
