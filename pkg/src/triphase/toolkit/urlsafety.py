"""URL safety: 10-point heuristic scoring plus a cached domain blocklist.

Scoring is pure and deterministic for a given (url, blocklist snapshot):
factor points are summed and capped at 10, a blocklist hit forces block,
and thresholds map the score onto allow / warn / block.
"""

from __future__ import annotations

import ipaddress
import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable
from urllib.parse import urlparse

BLOCK_THRESHOLD = 5
WARN_THRESHOLD = 3
CACHE_MAX_AGE = 24 * 3600.0

_CONFIG = json.loads(
    (resources.files("triphase") / "assets" / "websafety.json").read_text())

# Digit-for-letter substitutions commonly used in lookalike hostnames.
_CONFUSABLE = str.maketrans({"0": "o", "1": "l", "3": "e", "5": "s", "7": "t"})


class UrlError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


@dataclass
class UrlFactor:
    name: str
    points: int


@dataclass
class UrlVerdict:
    score: int
    factors: list[UrlFactor]
    blocklisted: bool
    action: str


class Blocklist:
    """Domain blocklist with a 24-hour refresh cache.

    File format: one domain per line, ``#`` comments. A host hits when it
    equals a blocked domain or is a subdomain of one.
    """

    def __init__(self, domains: Iterable[str] = (),
                 clock: Callable[[], float] = time.monotonic) -> None:
        self.domains = {d.strip().lower() for d in domains if d.strip()}
        self.clock = clock
        self.last_refresh: float | None = None
        self.refresh_count = 0

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> "Blocklist":
        lines = Path(path).read_text().splitlines()
        domains = [ln for ln in (l.strip() for l in lines)
                   if ln and not ln.startswith("#")]
        return cls(domains, **kw)

    def hit(self, host: str) -> bool:
        host = host.lower().rstrip(".")
        return any(host == d or host.endswith("." + d) for d in self.domains)

    def refresh(self, fetcher: Callable[[], Iterable[str]],
                max_age: float = CACHE_MAX_AGE) -> bool:
        """Pull fresh domains unless the cache is younger than max_age."""
        now = self.clock()
        if self.last_refresh is not None and now - self.last_refresh < max_age:
            return False
        self.domains = {d.strip().lower() for d in fetcher() if d.strip()}
        self.last_refresh = now
        self.refresh_count += 1
        return True


def _is_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host.strip("[]"))
        return True
    except ValueError:
        return False


def score_url(url: str, blocklist: Blocklist | None = None,
              config: dict | None = None) -> UrlVerdict:
    """Evaluate the heuristic rubric; blocklist hit forces block."""
    cfg = config or _CONFIG
    parsed = urlparse(url.strip())
    if not parsed.scheme:
        raise UrlError("unparseable_url", f"no scheme in {url!r}")
    dangerous = parsed.scheme.lower() not in ("http", "https")
    host = (parsed.hostname or "").lower()
    if not host and not dangerous:
        raise UrlError("unparseable_url", f"no host in {url!r}")

    factors: list[UrlFactor] = []

    def add(name: str, points: int) -> None:
        factors.append(UrlFactor(name, points))

    if dangerous:
        add("dangerous_protocol", 2)
    if host and _is_ip(host):
        add("ip_in_url", 2)
    tld = host.rsplit(".", 1)[-1] if "." in host else ""
    if tld in set(cfg.get("suspicious_tlds", ())):
        add("suspicious_tld", 1)

    brands = cfg.get("brands", ())
    real = cfg.get("brand_real_domains", {})
    deconfused = host.translate(_CONFUSABLE)
    for brand in brands:
        legit = any(host == d or host.endswith("." + d)
                    for d in real.get(brand, ()))
        if legit:
            continue
        if brand in host:
            add("brand_impersonation", 2)
            break
        if brand in deconfused and brand not in host:
            add("brand_impersonation", 2)
            add("homoglyph", 2)
            break
    if "xn--" in host and not any(f.name == "homoglyph" for f in factors):
        add("homoglyph", 2)
    if host.count(".") > 3:
        add("deep_subdomains", 1)
    if len(url) > 100:
        add("long_url", 1)

    score = min(10, sum(f.points for f in factors))
    blocked = bool(blocklist and host and blocklist.hit(host))
    if blocked:
        action = "block"
    elif score >= BLOCK_THRESHOLD:
        action = "block"
    elif score >= WARN_THRESHOLD:
        action = "warn"
    else:
        action = "allow"
    return UrlVerdict(score=score, factors=factors, blocklisted=blocked,
                      action=action)
