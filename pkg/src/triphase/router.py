"""Tool routing: alias normalization, auto-correction, permission gate, dispatch.

Raw tool types from model output pass through four stages:

1. normalize_type — case/whitespace/hyphen-insensitive lookup through the
   shipped alias table onto the 24 canonical categories.
2. auto_correct — ordered content rules that redirect a call whose
   instruction contradicts its type (at most one type change per call).
3. permission gate — per-category auto/ask/deny with a 60 s auto-deny
   timer on ask.
4. handler fallback chain — strategies tried in order, first success wins.

All stages are data-driven: the alias table, category set, and rule
order load from the package assets and can be overridden by files with
the same key layout.
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable

UNKNOWN = "unknown"

_ASSETS = resources.files("triphase") / "assets"


def _load_asset(name: str) -> dict:
    return json.loads((_ASSETS / name).read_text())


@dataclass
class ToolCall:
    """One parsed tool-call marker ready for routing."""

    instruction: str
    raw_type: str
    context: str | None = None


@dataclass
class Correction:
    from_type: str
    to_type: str
    reason: str


@dataclass
class RoutedCall:
    original: ToolCall
    canonical: str
    corrections: list[Correction] = field(default_factory=list)
    stripped_flags: list[str] = field(default_factory=list)
    instruction: str = ""

    def __post_init__(self) -> None:
        if not self.instruction:
            self.instruction = self.original.instruction


@dataclass
class ToolResult:
    ok: bool
    summary: str
    body: str = ""
    timestamp: float = 0.0
    strategy_used: str | None = None
    error_kind: str | None = None

    def freshness_line(self) -> str:
        return "retrieved-at: " + time.strftime(
            "%Y-%m-%dT%H:%M:%S%z", time.localtime(self.timestamp))


@dataclass
class PermissionPolicy:
    """Per-category permission levels; every canonical type has one."""

    levels: dict[str, str] = field(default_factory=dict)
    default_level: str = "auto"
    ask_timeout: float = 60.0
    session_remember: bool = False

    def level_for(self, category: str) -> str:
        return self.levels.get(category, self.default_level)

    @classmethod
    def from_file(cls, path) -> "PermissionPolicy":
        data = json.loads(open(path).read())
        return cls(
            levels=dict(data.get("levels", {})),
            default_level=data.get("default", "auto"),
            ask_timeout=float(data.get("ask_timeout", 60.0)),
            session_remember=bool(data.get("session_remember", False)),
        )


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

class CategoryTable:
    """Canonical category set plus the alias map, loaded from data files."""

    def __init__(self, categories: dict | None = None,
                 aliases: dict[str, str] | None = None) -> None:
        cats = categories or _load_asset("categories.json")
        self.categories: dict[str, dict] = {
            c["name"]: c for c in cats["categories"]}
        self.aliases: dict[str, str] = aliases or _load_asset("aliases.json")
        bad = set(self.aliases.values()) - set(self.categories)
        if bad:
            raise ValueError(f"aliases target unknown categories: {bad}")

    @property
    def names(self) -> list[str]:
        return list(self.categories)

    def supported(self, name: str) -> bool:
        return bool(self.categories.get(name, {}).get("supported"))

    @staticmethod
    def normalize_key(raw: str) -> str:
        key = raw.strip().lower().replace("-", "_")
        key = re.sub(r"\s+", "_", key)
        return re.sub(r"_+", "_", key).strip("_")

    def normalize_type(self, raw: str) -> str:
        """Canonical category for *raw*, or ``unknown``. Idempotent."""
        key = self.normalize_key(raw)
        if key in self.categories:
            return key
        return self.aliases.get(key, UNKNOWN)


# ---------------------------------------------------------------------------
# Auto-correction
# ---------------------------------------------------------------------------

_URL_RE = re.compile(r"https?://\S+", re.IGNORECASE)
_PATH_VERBS = ("copy", "move", "delete", "rename", "list", "dir", "mkdir")
_PATH_VERB_RE = re.compile(r"\b(%s)\b" % "|".join(_PATH_VERBS), re.IGNORECASE)
_DRIVE_RE = re.compile(r"\b[A-Za-z]:[\\/]")
_FLAG_RE = re.compile(r"(?:^|\s)(/[a-zA-Z]{1,2}|-{1,2}[a-zA-Z][a-zA-Z-]*)(?=\s|$)")
_FLAG_TOKEN_RE = re.compile(r"^(/[a-zA-Z]{1,2}|-{1,2}[a-zA-Z][a-zA-Z-]*)$")
_EXE_GUARD_RE = re.compile(r"\b(run|execute|launch|start)\s+\S+\.exe\b",
                           re.IGNORECASE)


class AutoCorrector:
    """Content-based type redirection, applied after normalization.

    Rule order is fixed: execution guards, URL rules, file-path rules,
    search-phrase rules. At most one type change fires per call.
    """

    def __init__(self, websafety: dict | None = None) -> None:
        self._safety = websafety or _load_asset("websafety.json")
        self._ecommerce = tuple(self._safety.get("ecommerce_hosts", ()))

    def _is_ecommerce(self, url: str) -> bool:
        host = re.sub(r"^https?://", "", url, flags=re.IGNORECASE)
        host = host.split("/", 1)[0].lower()
        return any(pat in host for pat in self._ecommerce)

    def _has_path_token(self, instruction: str) -> bool:
        if _DRIVE_RE.search(instruction):
            return True
        for token in instruction.split():
            if _URL_RE.match(token):
                continue
            if _FLAG_TOKEN_RE.match(token):
                continue
            if "\\" in token or "/" in token.strip('"'):
                return True
        return False

    def correct(self, call: ToolCall, canonical: str) -> RoutedCall:
        routed = RoutedCall(original=call, canonical=canonical)
        instr = call.instruction

        # Guard: explicit program execution is never redirected.
        if canonical == "cli" and _EXE_GUARD_RE.search(instr):
            return routed

        urls = _URL_RE.findall(instr)

        # URL rules.
        if canonical == "file_ops" and urls:
            target = "browser" if any(self._is_ecommerce(u) for u in urls) \
                else "web_read"
            routed.canonical = target
            routed.corrections.append(
                Correction(canonical, target, "URL in file-operation instruction"))
            return routed
        if canonical == "web_read" and urls and \
                any(self._is_ecommerce(u) for u in urls):
            routed.canonical = "browser"
            routed.corrections.append(
                Correction(canonical, "browser", "JS-heavy site detected"))
            return routed

        # File-path rule: path verb plus a path-like token in a cli call.
        if canonical == "cli" and _PATH_VERB_RE.search(instr) and \
                self._has_path_token(instr):
            flags = [m.strip() for m in _FLAG_RE.findall(instr)]
            cleaned = _FLAG_RE.sub("", instr)
            routed.canonical = "file_ops"
            routed.corrections.append(
                Correction(canonical, "file_ops", "file-path operation pattern"))
            routed.stripped_flags = flags
            routed.instruction = re.sub(r"\s{2,}", " ", cleaned).strip()
            return routed

        # Search-phrase rule: browsing types with a query and no URL.
        if canonical in ("browser", "web_read") and not urls and \
                len(instr.split()) >= 3:
            routed.canonical = "web_search"
            routed.corrections.append(
                Correction(canonical, "web_search",
                           "search-style query without URL"))
            return routed

        return routed


# ---------------------------------------------------------------------------
# Permission gate
# ---------------------------------------------------------------------------

@dataclass
class PermissionPrompt:
    prompt_id: str
    category: str
    summary: str
    opened_at: float
    deadline: float
    decision: str | None = None
    decided_at: float | None = None


class PermissionGate:
    """Serializes ask-level prompts and enforces the auto-deny deadline.

    The clock is injectable so the 60 s auto-deny is testable without
    wall-clock sleeps; `resolve` after the deadline reports ``stale``.
    """

    def __init__(self, clock: Callable[[], float] = time.monotonic,
                 poll_interval: float = 0.01) -> None:
        self.clock = clock
        self.poll_interval = poll_interval
        self._cond = threading.Condition()
        self._prompts: dict[str, PermissionPrompt] = {}
        self.on_prompt: Callable[[PermissionPrompt], None] | None = None
        self.on_resolved: Callable[[PermissionPrompt], None] | None = None

    def pending(self) -> list[PermissionPrompt]:
        with self._cond:
            return [p for p in self._prompts.values() if p.decision is None]

    def ask(self, category: str, summary: str, timeout_s: float) -> PermissionPrompt:
        now = self.clock()
        prompt = PermissionPrompt(
            prompt_id=uuid.uuid4().hex[:12], category=category,
            summary=summary, opened_at=now, deadline=now + timeout_s)
        with self._cond:
            self._prompts[prompt.prompt_id] = prompt
        if self.on_prompt:
            self.on_prompt(prompt)
        with self._cond:
            while prompt.decision is None and self.clock() < prompt.deadline:
                self._cond.wait(self.poll_interval)
            if prompt.decision is None:
                prompt.decision = "auto_deny"
                prompt.decided_at = prompt.deadline
        if self.on_resolved:
            self.on_resolved(prompt)
        return prompt

    def resolve(self, prompt_id: str, decision: str) -> str:
        """Record a user decision; returns accepted | stale | unknown."""
        if decision not in ("allow", "deny"):
            raise ValueError(f"bad decision {decision!r}")
        with self._cond:
            prompt = self._prompts.get(prompt_id)
            if prompt is None:
                return "unknown"
            if prompt.decision is not None or self.clock() >= prompt.deadline:
                return "stale"
            prompt.decision = decision
            prompt.decided_at = self.clock()
            self._cond.notify_all()
        return "accepted"

    def notify(self) -> None:
        """Wake waiting asks so they re-check an injected clock."""
        with self._cond:
            self._cond.notify_all()


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

Strategy = tuple[str, Callable[[RoutedCall], ToolResult]]


@dataclass
class RegistrationHandle:
    category: str
    router: "Router"

    def unregister(self) -> None:
        with self.router._lock:
            self.router._handlers.pop(self.category, None)


class Router:
    """Dispatches ToolCalls to registered handler chains."""

    def __init__(self, table: CategoryTable | None = None,
                 corrector: AutoCorrector | None = None,
                 gate: PermissionGate | None = None,
                 wall_clock: Callable[[], float] = time.time) -> None:
        self.table = table or CategoryTable()
        self.corrector = corrector or AutoCorrector()
        self.gate = gate or PermissionGate()
        self.wall_clock = wall_clock
        self._lock = threading.Lock()
        self._handlers: dict[str, list[Strategy]] = {}
        self._external: dict[str, Callable[[RoutedCall], ToolResult]] = {}
        self.call_counts: dict[str, int] = {}
        self.session_grants: dict[str, str] = {}

    # -- registration -------------------------------------------------------

    def register_handler(self, category: str,
                         chain: Iterable[Strategy]) -> RegistrationHandle:
        chain = list(chain)
        if not chain:
            raise ValueError("handler chain must be non-empty")
        names = [n for n, _ in chain]
        if len(set(names)) != len(names):
            raise ValueError("strategy names within a chain must be distinct")
        with self._lock:
            self._handlers[category] = chain
        return RegistrationHandle(category, self)

    def register_external(self, qualified_name: str,
                          fn: Callable[[RoutedCall], ToolResult]) -> None:
        if "/" not in qualified_name:
            raise ValueError("external tools require qualified server/tool names")
        with self._lock:
            self._external[qualified_name] = fn

    def unregister_external(self, qualified_name: str) -> None:
        with self._lock:
            self._external.pop(qualified_name, None)

    def external_names(self) -> list[str]:
        with self._lock:
            return sorted(self._external)

    # -- routing ------------------------------------------------------------

    def normalize_type(self, raw: str) -> str:
        return self.table.normalize_type(raw)

    def auto_correct(self, call: ToolCall) -> RoutedCall:
        canonical = self.table.normalize_type(call.raw_type)
        if canonical == UNKNOWN:
            return RoutedCall(original=call, canonical=UNKNOWN)
        return self.corrector.correct(call, canonical)

    def _error(self, summary: str, kind: str) -> ToolResult:
        return ToolResult(ok=False, summary=summary, body=summary,
                          timestamp=self.wall_clock(), error_kind=kind)

    def route(self, call: ToolCall, policy: PermissionPolicy | None = None,
              session: str = "default") -> ToolResult:
        policy = policy or PermissionPolicy()
        dispatch_time = self.wall_clock()

        routed = self.auto_correct(call)
        if routed.canonical == UNKNOWN:
            raw = call.raw_type.strip()
            with self._lock:
                external = self._external.get(raw)
            if external is None:
                return self._error(f"unknown tool type: {call.raw_type!r}",
                                   "unknown_type")
            target = raw
            chain: list[Strategy] = [(raw, external)]
        else:
            target = routed.canonical
            with self._lock:
                chain = list(self._handlers.get(target, ()))
            if not chain:
                return self._error(
                    f"no handler registered for {target}",
                    "unsupported_capability")

        denied = self._gate(target, routed, policy, session)
        if denied is not None:
            return denied

        self.call_counts[target] = self.call_counts.get(target, 0) + 1

        last: ToolResult | None = None
        for name, fn in chain:
            try:
                result = fn(routed)
            except Exception as exc:  # handler bugs surface as results
                result = ToolResult(ok=False, summary=f"{name} raised: {exc}",
                                    body=repr(exc), error_kind="handler_error")
            result.timestamp = max(result.timestamp, self.wall_clock(),
                                   dispatch_time)
            if result.ok:
                result.strategy_used = result.strategy_used or name
                return result
            last = result
        assert last is not None
        last.strategy_used = None
        return last

    def _gate(self, target: str, routed: RoutedCall,
              policy: PermissionPolicy, session: str) -> ToolResult | None:
        """Apply the permission level; a ToolResult means denial."""
        level = policy.level_for(target)
        if level == "deny":
            return self._error(f"{target} is blocked by policy",
                               "permission_denied")
        if level != "ask":
            return None
        grant_key = f"{session}:{target}"
        remembered = self.session_grants.get(grant_key)
        if remembered == "allow":
            return None
        if remembered == "deny":
            return self._error(f"{target} denied earlier this session",
                               "permission_denied")
        prompt = self.gate.ask(
            target, f"{target}: {routed.instruction}", policy.ask_timeout)
        if prompt.decision != "allow":
            detail = "auto-denied after timeout" \
                if prompt.decision == "auto_deny" else "denied by user"
            return self._error(f"{target} {detail}", "permission_denied")
        if policy.session_remember:
            self.session_grants[grant_key] = "allow"
        return None


def unsupported_handler(category: str) -> Strategy:
    """Chain for categories the build recognizes but cannot execute."""

    def handle(routed: RoutedCall) -> ToolResult:
        return ToolResult(
            ok=False,
            summary=f"category {category} is not supported in this build",
            body=f"the {category} capability is recognized but unsupported here",
            error_kind="unsupported_capability")

    return (f"{category}_unsupported", handle)


def load_routing_corpus() -> dict:
    """The shipped positive and negative routing corpora."""
    return _load_asset("routing_corpus.json")
