"""Recurring tasks, the idle Pulse, SOUL edit control, external tools.

Planned tasks persist as one JSON document with atomic rewrite; the
Pulse runs memory consolidation and due tasks after five idle minutes,
aborting between units when user activity resumes. The SOUL document is
sectioned text behind a three-level edit gate. External tool servers
speak a line-delimited JSON protocol (describe / invoke / health) over
a child-process pipe and are merged into the router with qualified
``server/tool`` names; built-ins always win bare-name collisions.
"""

from __future__ import annotations

import calendar
import hashlib
import json
import subprocess
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable

import jsonschema

from triphase.modelhub import parse_soul_sections, compose_soul
from triphase.router import (
    PermissionGate,
    Router,
    RoutedCall,
    ToolResult,
)

DEFAULT_IDLE_THRESHOLD = 300.0
RECURRENCES = ("daily", "weekly", "monthly")


class RuntimeError_(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


# ---------------------------------------------------------------------------
# planned tasks
# ---------------------------------------------------------------------------

@dataclass
class PlannedTask:
    id: str
    recurrence: str
    next_run: datetime
    payload: str
    enabled: bool = True

    def to_json(self) -> dict:
        return {"id": self.id, "recurrence": self.recurrence,
                "next_run": self.next_run.isoformat(),
                "payload": self.payload, "enabled": self.enabled}

    @classmethod
    def from_json(cls, d: dict) -> "PlannedTask":
        return cls(id=d["id"], recurrence=d["recurrence"],
                   next_run=datetime.fromisoformat(d["next_run"]),
                   payload=d["payload"], enabled=d.get("enabled", True))


def _add_month_clamped(moment: datetime) -> datetime:
    year, month = moment.year, moment.month
    if month == 12:
        year, month = year + 1, 1
    else:
        month += 1
    last = calendar.monthrange(year, month)[1]
    return moment.replace(year=year, month=month, day=min(moment.day, last))


def schedule_advance(task: PlannedTask, now: datetime) -> datetime:
    """Next occurrence strictly after *now* (skips missed slots)."""
    if task.recurrence not in RECURRENCES:
        raise RuntimeError_("bad_recurrence",
                            f"unknown recurrence {task.recurrence!r}")
    moment = task.next_run
    while moment <= now:
        if task.recurrence == "daily":
            moment += timedelta(days=1)
        elif task.recurrence == "weekly":
            moment += timedelta(days=7)
        else:
            moment = _add_month_clamped(moment)
    return moment


class PlannedTaskStore:
    """JSON-backed task list with atomic rewrite and a lock."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._tasks: dict[str, PlannedTask] = {}
        if self.path.exists():
            doc = json.loads(self.path.read_text())
            for raw in doc.get("tasks", ()):
                task = PlannedTask.from_json(raw)
                self._tasks[task.id] = task

    def _persist(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(
            {"tasks": [t.to_json() for t in self._tasks.values()]}, indent=2))
        tmp.replace(self.path)

    def add(self, recurrence: str, next_run: datetime, payload: str,
            enabled: bool = True) -> PlannedTask:
        if recurrence not in RECURRENCES:
            raise RuntimeError_("bad_recurrence",
                                f"unknown recurrence {recurrence!r}")
        task = PlannedTask(id=uuid.uuid4().hex[:12], recurrence=recurrence,
                           next_run=next_run, payload=payload,
                           enabled=enabled)
        with self._lock:
            self._tasks[task.id] = task
            self._persist()
        return task

    def update(self, task: PlannedTask) -> None:
        with self._lock:
            self._tasks[task.id] = task
            self._persist()

    def remove(self, task_id: str) -> None:
        with self._lock:
            self._tasks.pop(task_id, None)
            self._persist()

    def all(self) -> list[PlannedTask]:
        with self._lock:
            return sorted(self._tasks.values(), key=lambda t: t.next_run)

    def due(self, now: datetime) -> list[PlannedTask]:
        return [t for t in self.all() if t.enabled and t.next_run <= now]


# ---------------------------------------------------------------------------
# pulse
# ---------------------------------------------------------------------------

@dataclass
class PulseState:
    last_activity: float = 0.0
    idle_threshold: float = DEFAULT_IDLE_THRESHOLD
    running: bool = False

    def touch(self, now: float) -> None:
        self.last_activity = now


@dataclass
class PulseDeps:
    memomap: object
    tasks: PlannedTaskStore
    summarizer: object = None
    reviewer: object = None
    submit_run: Callable[[str], object] | None = None
    active_run: Callable[[], bool] = lambda: False
    now_datetime: Callable[[], datetime] = datetime.now


def pulse_tick(now: float, state: PulseState, deps: PulseDeps) -> list[str]:
    """One idle-check: consolidate memory, then run due tasks.

    Any user activity (a later last_activity) aborts remaining units
    before the next one starts. Per-unit failures are recorded and the
    pulse continues.
    """
    actions: list[str] = []
    if state.running:
        return actions
    if now - state.last_activity < state.idle_threshold:
        return actions
    if deps.active_run():
        return actions

    state.running = True
    started_activity = state.last_activity
    try:
        def interrupted() -> bool:
            return state.last_activity != started_activity

        if deps.summarizer is not None and deps.reviewer is not None:
            for day in list(deps.memomap.unconsolidated_days()):
                if interrupted():
                    actions.append("aborted: user activity")
                    return actions
                try:
                    entry = deps.memomap.merge_b(day, deps.summarizer,
                                                 deps.reviewer)
                    if entry is not None:
                        actions.append(f"merge_b:{day}")
                except Exception as exc:
                    actions.append(f"merge_b_failed:{day}:{exc}")

        wall_now = deps.now_datetime()
        for task in deps.tasks.due(wall_now):
            if interrupted():
                actions.append("aborted: user activity")
                return actions
            try:
                if deps.submit_run is not None:
                    deps.submit_run(task.payload)
                task.next_run = schedule_advance(task, wall_now)
                deps.tasks.update(task)
                actions.append(f"task:{task.id}")
            except Exception as exc:
                actions.append(f"task_failed:{task.id}:{exc}")
        return actions
    finally:
        state.running = False


# ---------------------------------------------------------------------------
# SOUL document store
# ---------------------------------------------------------------------------

class SoulStore:
    """Sectioned behavioral document with three-level edit control."""

    PROTECTED_SECTIONS = ("Identity",)

    def __init__(self, text: str, edit_level: str = "readonly",
                 gate: PermissionGate | None = None,
                 ask_timeout: float = 60.0) -> None:
        self.sections = parse_soul_sections(text)
        if edit_level not in ("readonly", "ask", "auto"):
            raise ValueError(f"bad edit level {edit_level!r}")
        self.edit_level = edit_level
        self.gate = gate or PermissionGate()
        self.ask_timeout = ask_timeout
        self._lock = threading.Lock()

    def text(self) -> str:
        with self._lock:
            return compose_soul(self.sections, list(self.sections))

    def content_hash(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    def soul_edit(self, section: str, new_text: str) -> str:
        """Returns applied | rejected; unknown sections raise."""
        with self._lock:
            if section not in self.sections:
                raise RuntimeError_("unknown_section",
                                    f"no SOUL section {section!r}")
            level = self.edit_level
        if level == "readonly":
            return "rejected"
        if level == "auto":
            if section in self.PROTECTED_SECTIONS:
                return "rejected"
            with self._lock:
                self.sections[section] = new_text.strip()
            return "applied"
        # ask: same prompt semantics as tool permissions (60 s auto-deny).
        prompt = self.gate.ask("soul_edit",
                               f"edit SOUL section {section}",
                               self.ask_timeout)
        if prompt.decision != "allow":
            return "rejected"
        with self._lock:
            self.sections[section] = new_text.strip()
        return "applied"


# ---------------------------------------------------------------------------
# external tool servers
# ---------------------------------------------------------------------------

@dataclass
class ExternalToolSpec:
    name: str
    description: str = ""
    input_schema: dict = field(default_factory=dict)


class StdioTransport:
    """Line-delimited JSON over a child process's stdin/stdout."""

    def __init__(self, argv: list[str]) -> None:
        self.argv = argv
        self.proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def connect(self) -> None:
        self.proc = subprocess.Popen(
            self.argv, shell=False, stdin=subprocess.PIPE,
            stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)

    def close(self) -> None:
        if self.proc is not None:
            self.proc.kill()
            self.proc = None

    @property
    def alive(self) -> bool:
        return self.proc is not None and self.proc.poll() is None

    def exchange(self, message: dict) -> dict:
        with self._lock:
            if not self.alive:
                raise ConnectionError("transport not connected")
            assert self.proc and self.proc.stdin and self.proc.stdout
            self.proc.stdin.write(json.dumps(message) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        if not line:
            raise ConnectionError("server closed the pipe")
        return json.loads(line)


class CallableTransport:
    """In-process fake transport for tests: dict in, dict out."""

    def __init__(self, handler: Callable[[dict], dict]) -> None:
        self.handler = handler
        self.alive = False

    def connect(self) -> None:
        self.alive = True

    def close(self) -> None:
        self.alive = False

    def exchange(self, message: dict) -> dict:
        if not self.alive:
            raise ConnectionError("transport not connected")
        return self.handler(message)


class ExternalToolServer:
    """One attached server: discovery, validation, health, dispatch."""

    def __init__(self, name: str, transport,
                 reconnect_attempts: int = 1) -> None:
        self.name = name
        self.transport = transport
        self.reconnect_attempts = reconnect_attempts
        self.tools: dict[str, ExternalToolSpec] = {}
        self.health = "down"

    def connect_and_discover(self) -> None:
        try:
            self.transport.connect()
            reply = self.transport.exchange({"op": "describe"})
        except (ConnectionError, OSError, json.JSONDecodeError) as exc:
            self.health = "down"
            raise RuntimeError_("connect_failed", str(exc))
        if not reply.get("ok") or not isinstance(reply.get("tools"), list):
            self.health = "down"
            raise RuntimeError_("discovery_malformed",
                                f"bad describe reply: {reply!r}")
        self.tools = {}
        for raw in reply["tools"]:
            if not isinstance(raw, dict) or not raw.get("name"):
                raise RuntimeError_("discovery_malformed",
                                    f"bad tool entry: {raw!r}")
            spec = ExternalToolSpec(
                name=raw["name"], description=raw.get("description", ""),
                input_schema=raw.get("input_schema", {}))
            self.tools[spec.name] = spec
        self.health = "connected"

    def check_health(self) -> str:
        try:
            reply = self.transport.exchange({"op": "health"})
            self.health = "connected" if reply.get("ok") else "degraded"
        except (ConnectionError, OSError, json.JSONDecodeError):
            self.health = "down"
        return self.health

    def _reconnect(self) -> bool:
        for _ in range(self.reconnect_attempts):
            try:
                self.transport.close()
                self.connect_and_discover()
                return True
            except RuntimeError_:
                continue
        return False

    def invoke(self, tool: str, args: dict) -> ToolResult:
        spec = self.tools.get(tool)
        if spec is None:
            return ToolResult(ok=False, summary=f"unknown tool {tool}",
                              timestamp=time.time(),
                              error_kind="validation_failed")
        if spec.input_schema:
            try:
                jsonschema.validate(args, spec.input_schema)
            except jsonschema.ValidationError as exc:
                return ToolResult(
                    ok=False, summary=f"argument validation failed: "
                    f"{exc.message}", body=str(exc),
                    timestamp=time.time(), error_kind="validation_failed")
        if self.health == "down" and not self._reconnect():
            return ToolResult(ok=False,
                              summary=f"server {self.name} is down",
                              timestamp=time.time(), error_kind="server_down")
        try:
            reply = self.transport.exchange(
                {"op": "invoke", "tool": tool, "args": args})
        except (ConnectionError, OSError, json.JSONDecodeError) as exc:
            self.health = "down"
            return ToolResult(ok=False, summary=f"server dropped: {exc}",
                              timestamp=time.time(), error_kind="server_down")
        if not reply.get("ok"):
            return ToolResult(ok=False,
                              summary=str(reply.get("error", "remote error")),
                              timestamp=time.time(), error_kind="remote_error")
        body = reply.get("result", "")
        if not isinstance(body, str):
            body = json.dumps(body)
        return ToolResult(ok=True, summary=f"{self.name}/{tool} ok",
                          body=body, timestamp=time.time())


def attach_tool_server(router: Router, name: str, transport,
                       reconnect_attempts: int = 1) -> ExternalToolServer:
    """Discover a server's tools and register them under qualified names."""
    server = ExternalToolServer(name, transport, reconnect_attempts)
    server.connect_and_discover()
    for tool_name in server.tools:
        qualified = f"{name}/{tool_name}"

        def dispatch(routed: RoutedCall, _tool=tool_name) -> ToolResult:
            args = parse_external_args(routed.instruction)
            return server.invoke(_tool, args)

        router.register_external(qualified, dispatch)
    return server


def detach_tool_server(router: Router, server: ExternalToolServer) -> None:
    for tool_name in server.tools:
        router.unregister_external(f"{server.name}/{tool_name}")
    server.transport.close()
    server.health = "down"


def parse_external_args(instruction: str) -> dict:
    """JSON instructions pass through; plain text becomes {"text": ...}."""
    text = instruction.strip()
    if text.startswith("{"):
        try:
            parsed = json.loads(text)
            if isinstance(parsed, dict):
                return parsed
        except json.JSONDecodeError:
            pass
    return {"text": instruction}
