"""Web tools: stage-1 HTTP content extraction and strategy-chain search.

web_read performs a plain HTTP GET with browser-like headers and strips
markup; pages that extract to fewer than 200 characters fall through to
a registered plugin slot (browser/OCR stages are plug-ins, not shipped).
E-commerce-pattern URLs skip HTTP entirely and go straight to the plugin
slot. web_search walks an ordered strategy chain, stops at the first
success, then enriches by fetching up to 10 result URLs through web_read
with safety filtering.
"""

from __future__ import annotations

import html as html_mod
import json
import re
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx

from triphase.router import ToolResult
from triphase.toolkit.urlsafety import Blocklist, UrlError, score_url, _CONFIG

LOW_CONTENT_CHARS = 200
ENRICH_LIMIT = 10

BROWSER_HEADERS = {
    "User-Agent": ("Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 "
                   "(KHTML, like Gecko) Chrome/124.0 Safari/537.36"),
    "Accept": "text/html,application/xhtml+xml,application/xml;q=0.9,*/*;q=0.8",
    "Accept-Language": "en-US,en;q=0.8",
}

_TAG_BLOCKS = re.compile(r"<(script|style|noscript)\b.*?</\1>",
                         re.IGNORECASE | re.DOTALL)
_TAGS = re.compile(r"<[^>]+>")
_HREF = re.compile(r'href=["\'](https?://[^"\']+)["\']', re.IGNORECASE)


class WebReadError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


@dataclass
class FetchReport:
    url: str
    status: int
    extracted_text: str
    char_count: int
    stage: str  # http | plugin_fallback
    freshness: float
    low_content: bool = False

    def freshness_line(self) -> str:
        return "retrieved-at: " + time.strftime(
            "%Y-%m-%dT%H:%M:%S%z", time.localtime(self.freshness))


@dataclass
class SearchStrategy:
    name: str
    kind: str  # http_post | http_get | external_plugin
    endpoint: str = ""
    param: str = "q"
    plugin: Callable[[str], list[dict]] | None = None


@dataclass
class WebSearchOutcome:
    result: ToolResult
    urls: list[str] = field(default_factory=list)
    enriched: list[FetchReport] = field(default_factory=list)
    strategy_errors: list[str] = field(default_factory=list)


def extract_text(html: str) -> str:
    """Stage-1 extraction: strip tags and collapse whitespace."""
    cleaned = _TAG_BLOCKS.sub(" ", html)
    cleaned = _TAGS.sub(" ", cleaned)
    cleaned = html_mod.unescape(cleaned)
    return re.sub(r"\s+", " ", cleaned).strip()


def _is_ecommerce(url: str, config: dict) -> bool:
    host = re.sub(r"^https?://", "", url, flags=re.IGNORECASE)
    host = host.split("/", 1)[0].lower()
    return any(pat in host for pat in config.get("ecommerce_hosts", ()))


def _is_junk(url: str, config: dict) -> bool:
    low = url.lower()
    return any(pat in low for pat in config.get("junk_url_patterns", ()))


def web_read(url: str,
             blocklist: Blocklist | None = None,
             client: httpx.Client | None = None,
             plugin: Callable[[str], tuple[str, int]] | None = None,
             config: dict | None = None,
             wall_clock: Callable[[], float] = time.time) -> FetchReport:
    """Fetch and extract a page; raises WebReadError on hard failures."""
    cfg = config or _CONFIG
    try:
        verdict = score_url(url, blocklist)
    except UrlError as exc:
        raise WebReadError("blocked_by_safety", str(exc)) from exc
    if verdict.action == "block":
        reason = "blocklisted" if verdict.blocklisted \
            else f"safety score {verdict.score}"
        raise WebReadError("blocked_by_safety", f"{url}: {reason}")

    def run_plugin() -> FetchReport:
        if plugin is None:
            raise WebReadError(
                "all_stages_failed",
                f"{url}: no plugin stage registered for fallback")
        text, status = plugin(url)
        return FetchReport(url=url, status=status, extracted_text=text,
                           char_count=len(text), stage="plugin_fallback",
                           freshness=wall_clock())

    if _is_ecommerce(url, cfg):
        return run_plugin()

    own_client = client is None
    cl = client or httpx.Client(timeout=10.0)
    try:
        resp = cl.get(url, headers=BROWSER_HEADERS, follow_redirects=True)
        status = resp.status_code
        body = resp.text
    except httpx.HTTPError as exc:
        if plugin is not None:
            return run_plugin()
        raise WebReadError("network_error", f"{url}: {exc}") from exc
    finally:
        if own_client:
            cl.close()
    if status >= 400:
        if plugin is not None:
            return run_plugin()
        raise WebReadError("network_error", f"{url}: HTTP {status}")

    text = extract_text(body)
    if len(text) < LOW_CONTENT_CHARS:
        if plugin is not None:
            return run_plugin()
        return FetchReport(url=url, status=status, extracted_text=text,
                           char_count=len(text), stage="http",
                           freshness=wall_clock(), low_content=True)
    return FetchReport(url=url, status=status, extracted_text=text,
                       char_count=len(text), stage="http",
                       freshness=wall_clock())


def _parse_results(payload: str) -> list[dict]:
    """Fixture endpoints answer JSON {results:[{title,url,snippet}]};
    HTML answers degrade to href extraction."""
    try:
        data = json.loads(payload)
        if isinstance(data, dict) and isinstance(data.get("results"), list):
            return [r for r in data["results"] if isinstance(r, dict)]
    except json.JSONDecodeError:
        pass
    return [{"title": u, "url": u} for u in _HREF.findall(payload)]


def web_search(query: str,
               chain: list[SearchStrategy],
               blocklist: Blocklist | None = None,
               client: httpx.Client | None = None,
               enrich: bool = True,
               read_plugin: Callable[[str], tuple[str, int]] | None = None,
               config: dict | None = None,
               wall_clock: Callable[[], float] = time.time) -> WebSearchOutcome:
    """Try strategies in order; first success wins, then enrich top URLs."""
    if not chain:
        raise ValueError("strategy chain must be non-empty")
    names = [s.name for s in chain]
    if len(set(names)) != len(names):
        raise ValueError("strategy names must be distinct within a chain")
    cfg = config or _CONFIG

    own_client = client is None
    cl = client or httpx.Client(timeout=10.0)
    errors: list[str] = []
    try:
        for strategy in chain:
            try:
                results = _run_strategy(strategy, query, cl)
            except Exception as exc:
                errors.append(f"{strategy.name}: {exc}")
                continue
            if not results:
                errors.append(f"{strategy.name}: no results")
                continue
            urls = [r["url"] for r in results if r.get("url")]
            kept = [u for u in urls
                    if not _is_junk(u, cfg) and not _is_ecommerce(u, cfg)]
            enriched: list[FetchReport] = []
            if enrich:
                for u in kept[:ENRICH_LIMIT]:
                    try:
                        enriched.append(web_read(
                            u, blocklist=blocklist, client=cl,
                            plugin=read_plugin, config=cfg,
                            wall_clock=wall_clock))
                    except WebReadError:
                        continue
            lines = [f"{r.get('title', '')} {r.get('url', '')}".strip()
                     for r in results]
            result = ToolResult(
                ok=True, summary=f"{len(results)} results via {strategy.name}",
                body="\n".join(lines), timestamp=wall_clock(),
                strategy_used=strategy.name)
            return WebSearchOutcome(result=result, urls=kept,
                                    enriched=enriched, strategy_errors=errors)
    finally:
        if own_client:
            cl.close()

    result = ToolResult(
        ok=False, summary="all search strategies failed",
        body="\n".join(errors), timestamp=wall_clock(),
        error_kind="all_strategies_failed")
    return WebSearchOutcome(result=result, strategy_errors=errors)


def _run_strategy(strategy: SearchStrategy, query: str,
                  client: httpx.Client) -> list[dict]:
    if strategy.kind == "http_post":
        resp = client.post(strategy.endpoint, data={strategy.param: query},
                           headers=BROWSER_HEADERS)
    elif strategy.kind == "http_get":
        resp = client.get(strategy.endpoint, params={strategy.param: query},
                          headers=BROWSER_HEADERS)
    elif strategy.kind == "external_plugin":
        if strategy.plugin is None:
            raise RuntimeError("plugin strategy has no plugin registered")
        return strategy.plugin(query)
    else:
        raise ValueError(f"unknown strategy kind {strategy.kind}")
    resp.raise_for_status()
    return _parse_results(resp.text)
