"""Command sandbox: explicit argv, no shell, placeholder scan, timeout kill.

Nothing here ever passes a command through a shell interpreter: the argv
is spawned directly, so metacharacter strings survive verbatim into the
child. Template placeholders ({name}, <name>) are rejected before any
process is created. The clock and the process factory are injectable so
the timeout path is testable without wall-clock sleeps.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from typing import Callable

from triphase.router import ToolResult

DEFAULT_TIMEOUT = 30.0
DEFAULT_ENV_ALLOWLIST = ("PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "TZ")

PLACEHOLDER_RE = re.compile(r"\{[A-Za-z_][A-Za-z0-9_]*\}|<[A-Za-z_][A-Za-z0-9_ -]*>")


@dataclass
class SandboxSpec:
    argv: list[str]
    timeout: float = DEFAULT_TIMEOUT
    working_dir: str | None = None
    env_allowlist: tuple[str, ...] = DEFAULT_ENV_ALLOWLIST
    extra_env: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_instruction(cls, instruction: str, **kw) -> "SandboxSpec":
        """shlex-split an instruction into argv (quoting only, no shell)."""
        return cls(argv=shlex.split(instruction, posix=True), **kw)


def _result(ok: bool, summary: str, body: str, kind: str | None) -> ToolResult:
    return ToolResult(ok=ok, summary=summary, body=body,
                      timestamp=time.time(), error_kind=kind)


def scan_placeholders(argv: list[str]) -> str | None:
    for element in argv:
        m = PLACEHOLDER_RE.search(element)
        if m:
            return m.group(0)
    return None


def _default_popen(argv: list[str], cwd: str | None, env: dict[str, str]):
    return subprocess.Popen(
        argv, shell=False, cwd=cwd, env=env,
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)


def cli_execute(spec: SandboxSpec,
                popen_factory: Callable = _default_popen,
                clock: Callable[[], float] = time.monotonic) -> ToolResult:
    """Run argv in the sandbox; total function, errors come back as results."""
    if not spec.argv or not str(spec.argv[0]).strip():
        return _result(False, "empty command", "no argv[0] given",
                       "empty_command")
    hit = scan_placeholders(spec.argv)
    if hit:
        return _result(False, f"unresolved template placeholder {hit}",
                       f"rejected before spawn: {hit}", "placeholder_rejected")
    if spec.timeout <= 0:
        return _result(False, "timeout must be positive", "bad timeout",
                       "empty_command")

    env = {k: v for k, v in os.environ.items() if k in spec.env_allowlist}
    env.update(spec.extra_env)

    start = clock()
    try:
        proc = popen_factory(spec.argv, spec.working_dir, env)
    except (OSError, ValueError) as exc:
        return _result(False, f"spawn failed: {exc}", repr(exc), "spawn_failed")

    deadline = start + spec.timeout
    try:
        out, err = proc.communicate(timeout=max(0.0, deadline - clock()))
    except subprocess.TimeoutExpired:
        proc.kill()
        try:
            out, err = proc.communicate(timeout=5)
        except Exception:
            out, err = "", ""
        elapsed = clock() - start
        return _result(
            False, f"killed after {elapsed:.3f}s timeout",
            (out or "") + (err or ""), "timeout_killed")

    body = (out or "")
    if err:
        body += ("\n[stderr]\n" + err) if body else err
    if proc.returncode != 0:
        return _result(False, f"exit code {proc.returncode}", body,
                       "nonzero_exit")
    return _result(True, f"exit code 0", body, None)
