"""Network probes: dns resolution, port checks, TCP reachability ping.

"ping" is a TCP connect probe (ICMP needs elevated privileges); a refused
connection proves the host answered, a timeout means unreachable.
"""

from __future__ import annotations

import socket
import time

from triphase.router import ToolResult

DEFAULT_TIMEOUT = 1.0


def _ok(summary: str, body: str = "") -> ToolResult:
    return ToolResult(ok=True, summary=summary, body=body or summary,
                      timestamp=time.time())


def _err(summary: str, kind: str) -> ToolResult:
    return ToolResult(ok=False, summary=summary, body=summary,
                      timestamp=time.time(), error_kind=kind)


def network_probe(op: str, target: str, port: int | None = None,
                  timeout: float = DEFAULT_TIMEOUT) -> ToolResult:
    if op == "dns":
        try:
            infos = socket.getaddrinfo(target, None)
        except socket.gaierror as exc:
            return _err(f"cannot resolve {target}: {exc}", "resolve_failed")
        addrs = sorted({info[4][0] for info in infos})
        return _ok(f"{target} resolves to {len(addrs)} address(es)",
                   "\n".join(addrs))

    if op == "port":
        if port is None:
            return _err("port probe needs a port number", "resolve_failed")
        try:
            with socket.create_connection((target, port), timeout=timeout):
                return _ok(f"port {port} on {target} is open")
        except ConnectionRefusedError:
            return _ok(f"port {port} on {target} is closed",
                       f"connection refused on {target}:{port}")
        except (socket.timeout, OSError) as exc:
            return _err(f"{target}:{port} unreachable: {exc}", "unreachable")

    if op == "ping":
        probe_port = port or 80
        try:
            with socket.create_connection((target, probe_port), timeout=timeout):
                return _ok(f"{target} reachable (tcp {probe_port} open)")
        except ConnectionRefusedError:
            return _ok(f"{target} reachable (tcp {probe_port} refused)")
        except (socket.timeout, OSError) as exc:
            return _err(f"{target} unreachable: {exc}", "unreachable")

    return _err(f"unsupported network op: {op}", "unreachable")
