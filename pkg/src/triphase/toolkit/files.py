"""Filesystem operations: list/copy/move/rename/delete/meta, writes, archives.

Instructions arrive as natural text ("copy A to B"); the parsing helpers
here split verbs and paths, honoring quoted segments with escaped quotes
and the last unquoted " to " as the two-path separator.
"""

from __future__ import annotations

import shutil
import time
import zipfile
from pathlib import Path

from triphase.router import ToolResult

FILE_OPS = ("list", "copy", "move", "rename", "delete", "meta")

_MAGIC = [
    (b"PK\x03\x04", "zip archive"),
    (b"\x89PNG", "png image"),
    (b"\x7fELF", "elf binary"),
    (b"%PDF", "pdf document"),
    (b"\x1f\x8b", "gzip data"),
    (b"MZ", "dos/windows executable"),
]


def _ok(summary: str, body: str = "") -> ToolResult:
    return ToolResult(ok=True, summary=summary, body=body or summary,
                      timestamp=time.time())


def _err(summary: str, kind: str) -> ToolResult:
    return ToolResult(ok=False, summary=summary, body=summary,
                      timestamp=time.time(), error_kind=kind)


def unquote_path(raw: str) -> str:
    """Strip one level of double quotes, honoring ``\\"`` escapes."""
    s = raw.strip()
    if len(s) >= 2 and s[0] == '"':
        out: list[str] = []
        i = 1
        while i < len(s):
            ch = s[i]
            if ch == "\\" and i + 1 < len(s) and s[i + 1] == '"':
                out.append('"')
                i += 2
                continue
            if ch == '"':
                break
            out.append(ch)
            i += 1
        return "".join(out)
    return s


def split_two_paths(rest: str) -> tuple[str, str] | None:
    """Split on the last `` to `` that is not inside double quotes."""
    in_quotes = False
    last = -1
    i = 0
    while i < len(rest):
        ch = rest[i]
        if ch == "\\" and i + 1 < len(rest) and rest[i + 1] == '"':
            i += 2
            continue
        if ch == '"':
            in_quotes = not in_quotes
        elif not in_quotes and rest.startswith(" to ", i):
            last = i
        i += 1
    if last < 0:
        return None
    return rest[:last], rest[last + 4:]


def file_meta(path: Path) -> str:
    st = path.stat()
    kind = "directory" if path.is_dir() else "file"
    lines = [f"path: {path}", f"kind: {kind}", f"size: {st.st_size}"]
    if path.is_file():
        head = path.open("rb").read(8)
        for magic, label in _MAGIC:
            if head.startswith(magic):
                lines.append(f"format: {label}")
                break
        else:
            lines.append("format: unknown/binary" if b"\x00" in head
                         else "format: text")
    return "\n".join(lines)


def file_ops_execute(op: str, paths: list[str],
                     overwrite: bool = False) -> ToolResult:
    """Apply one filesystem operation; two-path ops take [src, dst]."""
    if op not in FILE_OPS:
        return _err(f"unsupported file op: {op}", "invalid_path")
    try:
        src = Path(paths[0])
    except (IndexError, TypeError):
        return _err("missing path argument", "invalid_path")

    if op == "list":
        if not src.exists():
            return _err(f"not found: {src}", "not_found")
        if not src.is_dir():
            return _err(f"not a directory: {src}", "invalid_path")
        entries = sorted(src.iterdir(), key=lambda p: p.name)
        body = "\n".join(
            f"{p.name}/" if p.is_dir() else p.name for p in entries)
        return _ok(f"{len(entries)} entries in {src}", body or "(empty)")

    if op == "meta":
        if not src.exists():
            return _err(f"not found: {src}", "not_found")
        return _ok(f"metadata for {src.name}", file_meta(src))

    if op == "delete":
        if not src.exists():
            return _err(f"not found: {src}", "not_found")
        try:
            if src.is_dir():
                shutil.rmtree(src)
            else:
                src.unlink()
        except PermissionError as exc:
            return _err(str(exc), "permission_denied_fs")
        return _ok(f"deleted {src}")

    # Two-path operations.
    if len(paths) < 2:
        return _err(f"{op} needs a destination path", "invalid_path")
    dst = Path(paths[1])
    if not src.exists():
        return _err(f"not found: {src}", "not_found")
    if dst.exists() and not overwrite:
        return _err(f"destination exists: {dst}", "destination_exists")
    try:
        dst.parent.mkdir(parents=True, exist_ok=True)
        if op == "copy":
            if src.is_dir():
                shutil.copytree(src, dst, dirs_exist_ok=overwrite)
            else:
                shutil.copy2(src, dst)
            return _ok(f"copied {src} to {dst}")
        # move / rename share semantics: source gone, destination present.
        shutil.move(str(src), str(dst))
        return _ok(f"moved {src} to {dst}")
    except PermissionError as exc:
        return _err(str(exc), "permission_denied_fs")
    except OSError as exc:
        return _err(str(exc), "invalid_path")


def make_dir(path: str) -> ToolResult:
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _err(str(exc), "invalid_path")
    return _ok(f"created directory {path}")


def file_write(path: str, content: str, mode: str = "create") -> ToolResult:
    """Write *content* to *path*; mode create refuses existing files."""
    target = Path(path)
    if mode not in ("create", "overwrite"):
        return _err(f"bad mode {mode}", "io_error")
    if mode == "create" and target.exists():
        return _err(f"already exists: {target}", "exists")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
    except OSError as exc:
        return _err(str(exc), "io_error")
    return _ok(f"wrote {len(content)} chars to {target}")


def archive_ops(op: str, src: str, dst: str) -> ToolResult:
    """Zip-based compress/extract; round-trip safe including empty dirs."""
    if op == "compress":
        root = Path(src)
        if not root.exists():
            return _err(f"not found: {root}", "io_error")
        try:
            with zipfile.ZipFile(dst, "w", zipfile.ZIP_DEFLATED) as zf:
                if root.is_file():
                    zf.write(root, root.name)
                else:
                    members = sorted(root.rglob("*"))
                    for member in members:
                        rel = member.relative_to(root)
                        if member.is_dir():
                            zf.writestr(str(rel) + "/", b"")
                        else:
                            zf.write(member, str(rel))
                    if not members:
                        zf.writestr(".keep-empty/", b"")
        except OSError as exc:
            return _err(str(exc), "io_error")
        return _ok(f"compressed {src} to {dst}")

    if op == "extract":
        out = Path(dst)
        try:
            with zipfile.ZipFile(src) as zf:
                out.mkdir(parents=True, exist_ok=True)
                for info in zf.infolist():
                    name = info.filename
                    target = (out / name).resolve()
                    if not str(target).startswith(str(out.resolve())):
                        return _err(f"unsafe member path {name}", "bad_archive")
                    if name == ".keep-empty/":
                        continue
                    zf.extract(info, out)
        except (zipfile.BadZipFile, NotImplementedError):
            return _err(f"corrupt or unreadable archive: {src}", "bad_archive")
        except FileNotFoundError:
            return _err(f"not found: {src}", "io_error")
        except OSError as exc:
            return _err(str(exc), "io_error")
        return _ok(f"extracted {src} to {dst}")

    return _err(f"unsupported archive op: {op}", "io_error")
