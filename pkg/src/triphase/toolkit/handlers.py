"""Instruction adapters wiring toolkit operations into a Router.

Each handler receives the RoutedCall (post normalization/correction),
parses verbs and paths out of the instruction text, and calls the typed
operation. Unsupported categories get an explicit unsupported handler so
they always answer with the category named rather than silently passing.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx

from triphase.router import (
    CategoryTable,
    Router,
    RoutedCall,
    ToolResult,
    unsupported_handler,
)
from triphase.toolkit.classifytool import classify_result
from triphase.toolkit.files import (
    archive_ops,
    file_ops_execute,
    file_write,
    make_dir,
    split_two_paths,
    unquote_path,
)
from triphase.toolkit.network import network_probe
from triphase.toolkit.sandbox import SandboxSpec, cli_execute
from triphase.toolkit.urlsafety import Blocklist
from triphase.toolkit.web import (
    SearchStrategy,
    WebReadError,
    web_read,
    web_search,
)

_URL_RE = re.compile(r"https?://\S+", re.IGNORECASE)

_FILE_VERBS = {
    "list": "list", "dir": "list", "enumerate": "list",
    "copy": "copy", "move": "move", "rename": "rename",
    "delete": "delete", "remove": "delete",
    "meta": "meta", "info": "meta", "inspect": "meta",
    "mkdir": "mkdir",
}

# Documented default endpoints (shape only; tests use loopback fixtures).
DEFAULT_SEARCH_CHAIN = [
    SearchStrategy(name="ddg_http", kind="http_post",
                   endpoint="https://html.duckduckgo.com/html/", param="q"),
    SearchStrategy(name="bing_http", kind="http_get",
                   endpoint="https://www.bing.com/search", param="q"),
]


@dataclass
class ToolkitContext:
    """Shared dependencies for the built-in handlers."""

    blocklist: Blocklist = field(default_factory=Blocklist)
    http_client: httpx.Client | None = None
    search_chain: list[SearchStrategy] = field(
        default_factory=lambda: list(DEFAULT_SEARCH_CHAIN))
    read_plugin: Callable[[str], tuple[str, int]] | None = None
    classify_session: object | None = None
    cli_timeout: float = 30.0
    wall_clock: Callable[[], float] = time.time


def _err(summary: str, kind: str) -> ToolResult:
    return ToolResult(ok=False, summary=summary, body=summary,
                      timestamp=time.time(), error_kind=kind)


def parse_file_instruction(instruction: str) -> tuple[str, list[str]] | None:
    """Pull (op, paths) out of a file instruction, or None."""
    stripped = instruction.strip()
    if not stripped:
        return None
    head, _, rest = stripped.partition(" ")
    op = _FILE_VERBS.get(head.lower())
    if op is None:
        return None
    rest = rest.strip()
    if op in ("copy", "move", "rename"):
        parts = split_two_paths(rest)
        if parts is None:
            return None
        return op, [unquote_path(parts[0]), unquote_path(parts[1])]
    if not rest:
        return None
    return op, [unquote_path(rest)]


def file_ops_handler(routed: RoutedCall) -> ToolResult:
    parsed = parse_file_instruction(routed.instruction)
    if parsed is None:
        return _err(f"cannot parse file operation: {routed.instruction!r}",
                    "invalid_path")
    op, paths = parsed
    if op == "mkdir":
        return make_dir(paths[0])
    return file_ops_execute(op, paths)


_WRITE_TO = re.compile(r'^(?:write|save)\s+"((?:[^"\\]|\\.)*)"\s+to\s+(.+)$',
                       re.IGNORECASE | re.DOTALL)
_CREATE_WITH = re.compile(
    r'^(?:create|overwrite)(?:\s+(?:a\s+)?(?:new\s+)?(?:text\s+)?file)?\s+'
    r'(\S+|"[^"]+")\s+(?:with|containing)\s+(?:content\s+|the\s+text\s+)?(.+)$',
    re.IGNORECASE | re.DOTALL)


def file_write_handler(routed: RoutedCall) -> ToolResult:
    instr = routed.instruction.strip()
    mode = "overwrite" if instr.lower().startswith("overwrite") else "create"
    m = _WRITE_TO.match(instr)
    if m:
        content = m.group(1).replace('\\"', '"')
        return file_write(unquote_path(m.group(2)), content, mode)
    m = _CREATE_WITH.match(instr)
    if m:
        content = m.group(2).strip()
        if content.startswith('"') and content.endswith('"'):
            content = content[1:-1]
        return file_write(unquote_path(m.group(1)), content, mode)
    return _err(f"cannot parse write instruction: {instr!r}", "io_error")


def archive_handler(routed: RoutedCall) -> ToolResult:
    instr = routed.instruction.strip()
    head, _, rest = instr.partition(" ")
    op = {"compress": "compress", "zip": "compress",
          "extract": "extract", "unzip": "extract"}.get(head.lower())
    if op is None:
        return _err(f"cannot parse archive op: {instr!r}", "io_error")
    parts = split_two_paths(rest.strip())
    if parts is None:
        return _err("archive ops need 'SRC to DST'", "io_error")
    return archive_ops(op, unquote_path(parts[0]), unquote_path(parts[1]))


def binary_read_handler(routed: RoutedCall) -> ToolResult:
    tokens = routed.instruction.split()
    if not tokens:
        return _err("no path in instruction", "invalid_path")
    return file_ops_execute("meta", [unquote_path(tokens[-1])])


def make_cli_handler(ctx: ToolkitContext):
    def handle(routed: RoutedCall) -> ToolResult:
        try:
            spec = SandboxSpec.from_instruction(
                routed.instruction, timeout=ctx.cli_timeout)
        except ValueError as exc:
            return _err(f"cannot tokenize command: {exc}", "spawn_failed")
        return cli_execute(spec)
    return handle


def make_web_read_handler(ctx: ToolkitContext):
    def handle(routed: RoutedCall) -> ToolResult:
        m = _URL_RE.search(routed.instruction)
        if not m:
            return _err(f"no URL in instruction: {routed.instruction!r}",
                        "network_error")
        url = m.group(0).rstrip(".,);")
        try:
            report = web_read(url, blocklist=ctx.blocklist,
                              client=ctx.http_client, plugin=ctx.read_plugin,
                              wall_clock=ctx.wall_clock)
        except WebReadError as exc:
            return _err(str(exc), exc.kind)
        flag = " [low_content]" if report.low_content else ""
        return ToolResult(
            ok=True,
            summary=f"{report.char_count} chars via {report.stage}{flag}",
            body=f"{report.freshness_line()}\n{report.extracted_text}",
            timestamp=report.freshness)
    return handle


def make_web_search_chain(ctx: ToolkitContext):
    """One router strategy per search strategy, preserving chain order."""
    def run_one(strategy: SearchStrategy):
        def handle(routed: RoutedCall) -> ToolResult:
            outcome = web_search(
                routed.instruction, [strategy], blocklist=ctx.blocklist,
                client=ctx.http_client, read_plugin=ctx.read_plugin,
                wall_clock=ctx.wall_clock)
            if outcome.result.ok:
                enriched = "\n".join(
                    f"- {r.url} ({r.char_count} chars)"
                    for r in outcome.enriched)
                if enriched:
                    outcome.result.body += "\n[enriched]\n" + enriched
            return outcome.result
        return handle

    return [(s.name, run_one(s)) for s in ctx.search_chain]


def make_classify_handler(ctx: ToolkitContext):
    labels_re = re.compile(r"\b(?:as|into|between)\s+(.+)$", re.IGNORECASE)

    def handle(routed: RoutedCall) -> ToolResult:
        if ctx.classify_session is None:
            return _err("no classification model configured", "model_error")
        m = labels_re.search(routed.instruction)
        if not m:
            return _err("cannot find labels in instruction", "model_error")
        labels = [p.strip() for p in re.split(r"\s+or\s+|,", m.group(1))
                  if p.strip()]
        text = routed.instruction[:m.start()].strip()
        return classify_result(text, labels, ctx.classify_session)
    return handle


def network_handler(routed: RoutedCall) -> ToolResult:
    instr = routed.instruction.strip()
    port_m = re.search(r"\bport\s+(\d+)\s+on\s+(\S+)", instr, re.IGNORECASE)
    if port_m:
        return network_probe("port", port_m.group(2), int(port_m.group(1)))
    head, _, rest = instr.partition(" ")
    target = rest.split()[0] if rest.split() else ""
    verb = head.lower()
    if verb == "ping" and target:
        return network_probe("ping", target)
    if verb in ("dns", "resolve", "nslookup") and target:
        return network_probe("dns", target)
    if verb in ("wifi", "ftp") or "wifi" in instr.lower():
        return _err("wifi/ftp operations are not supported in this build",
                    "unsupported_capability")
    return _err(f"cannot parse network probe: {instr!r}", "unreachable")


def build_default_router(ctx: ToolkitContext | None = None,
                         router: Router | None = None) -> Router:
    """Register built-in chains for all 24 categories on a Router."""
    ctx = ctx or ToolkitContext()
    router = router or Router()
    table = router.table if isinstance(router.table, CategoryTable) else CategoryTable()

    router.register_handler("file_ops", [("local_fs", file_ops_handler)])
    router.register_handler("file_write", [("local_fs_write", file_write_handler)])
    router.register_handler("archive", [("zip_archive", archive_handler)])
    router.register_handler("binary_read", [("file_meta", binary_read_handler)])
    router.register_handler("cli", [("sandboxed_argv", make_cli_handler(ctx))])
    router.register_handler("web_read", [("http_stage1", make_web_read_handler(ctx))])
    router.register_handler("web_search", make_web_search_chain(ctx))
    router.register_handler("classify", [("model_classify", make_classify_handler(ctx))])
    router.register_handler("network", [("socket_probe", network_handler)])

    for name in table.names:
        if not table.supported(name):
            router.register_handler(name, [unsupported_handler(name)])
    return router
