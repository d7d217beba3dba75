"""Marker grammar for model output.

Model text carries structured markers embedded in prose:

    [TOOL_CALL: <instruction> | type: <type> | context: <context>]
    [SKILL: <name> | <key>: <value> (| <key>: <value>)*]
    [FINAL_ANSWER: <text>]            or, at line start:  FINAL_ANSWER: <text>
    [INTERVENTION_NEEDED: <text>]     or, at line start:  INTERVENTION_NEEDED: <text>

Field values may contain a literal ``|`` only when escaped as ``\\|``;
an unescaped ``|`` splits fields.  A line-start ``FINAL_ANSWER:`` payload
extends to the end of the message (stopping only at a later bracketed
marker, whose span must stay disjoint).  Malformed markers (unbalanced
bracket, tool call without a ``type`` field) are never errors: they stay
in the residual text and are reported as warnings.

Parsing is lossless: every marker records its exact source span and raw
text, so :func:`reconstruct` rebuilds the original input byte-for-byte.

Thinking segments delimited by literal ``<think>``/``</think>`` tags are
split out separately by :func:`extract_thinking`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

TOOL_CALL = "tool_call"
SKILL = "skill"
FINAL_ANSWER = "final_answer"
INTERVENTION = "intervention"

_HEADS = {
    "TOOL_CALL:": TOOL_CALL,
    "SKILL:": SKILL,
    "FINAL_ANSWER:": FINAL_ANSWER,
    "INTERVENTION_NEEDED:": INTERVENTION,
}

_LINE_HEADS = {
    "FINAL_ANSWER:": FINAL_ANSWER,
    "INTERVENTION_NEEDED:": INTERVENTION,
}

_THINK_OPEN = "<think>"
_THINK_CLOSE = "</think>"


@dataclass
class ToolCallPayload:
    instruction: str
    raw_type: str
    context: str | None = None


@dataclass
class SkillPayload:
    name: str
    params: dict[str, str] = field(default_factory=dict)


@dataclass
class TextPayload:
    text: str


@dataclass
class Marker:
    kind: str
    payload: ToolCallPayload | SkillPayload | TextPayload
    span: tuple[int, int]
    raw: str


@dataclass
class MarkerStream:
    items: list[Marker] = field(default_factory=list)
    residual_text: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def tool_calls(self) -> list[Marker]:
        return [m for m in self.items if m.kind == TOOL_CALL]

    @property
    def skills(self) -> list[Marker]:
        return [m for m in self.items if m.kind == SKILL]

    def first(self, kind: str) -> Marker | None:
        for m in self.items:
            if m.kind == kind:
                return m
        return None


@dataclass
class ThinkingSplit:
    thinking: str
    visible: str


def _split_fields(body: str) -> list[str]:
    """Split on unescaped ``|`` and unescape ``\\|`` in each field."""
    fields: list[str] = []
    buf: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body) and body[i + 1] == "|":
            buf.append("|")
            i += 2
            continue
        if ch == "|":
            fields.append("".join(buf))
            buf = []
            i += 1
            continue
        buf.append(ch)
        i += 1
    fields.append("".join(buf))
    return fields


def _parse_kv(fields: list[str]) -> dict[str, str] | None:
    """Parse ``key: value`` fields; None when any field lacks a colon."""
    out: dict[str, str] = {}
    for f in fields:
        if ":" not in f:
            return None
        key, _, value = f.partition(":")
        out[key.strip()] = value.strip()
    return out


def _balanced_bracket_end(text: str, start: int) -> int:
    """Index just past the ``]`` matching ``[`` at *start*, or -1."""
    depth = 0
    i = start
    while i < len(text):
        ch = text[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return -1


def _head_at(text: str, pos: int) -> str | None:
    for head in _HEADS:
        if text.startswith(head, pos):
            return head
    return None


def _build_bracket_marker(raw: str, span: tuple[int, int], head: str,
                          warnings: list[str]) -> Marker | None:
    body = raw[1 + len(head):-1]
    kind = _HEADS[head]
    if kind == TOOL_CALL:
        fields = _split_fields(body)
        instruction = fields[0].strip()
        kv = _parse_kv(fields[1:])
        if kv is None:
            warnings.append(f"tool call at {span[0]}: malformed field (missing ':')")
            return None
        raw_type = kv.pop("type", "").strip()
        if not instruction or not raw_type:
            warnings.append(f"tool call at {span[0]}: missing instruction or type field")
            return None
        context = kv.get("context") or None
        return Marker(TOOL_CALL, ToolCallPayload(instruction, raw_type, context), span, raw)
    if kind == SKILL:
        fields = _split_fields(body)
        name = fields[0].strip()
        if not name:
            warnings.append(f"skill marker at {span[0]}: empty name")
            return None
        params = _parse_kv(fields[1:])
        if params is None:
            warnings.append(f"skill marker at {span[0]}: malformed parameter field")
            return None
        return Marker(SKILL, SkillPayload(name, params), span, raw)
    # FINAL_ANSWER / INTERVENTION_NEEDED bracketed forms carry plain text.
    return Marker(kind, TextPayload(body.strip()), span, raw)


_LINE_HEAD_RE = re.compile(r"(?:^|(?<=\s))(FINAL_ANSWER:|INTERVENTION_NEEDED:)")


def parse_markers(text: str) -> MarkerStream:
    """Extract every syntactically valid marker from *text*.

    Total function: malformed candidates stay in ``residual_text`` and
    produce warnings, never exceptions.
    """
    warnings: list[str] = []
    markers: list[Marker] = []

    # Pass 1: bracketed markers, left to right, balanced-bracket spans.
    pos = 0
    while pos < len(text):
        lb = text.find("[", pos)
        if lb < 0:
            break
        head = _head_at(text, lb + 1)
        if head is None:
            pos = lb + 1
            continue
        end = _balanced_bracket_end(text, lb)
        if end < 0:
            warnings.append(f"unbalanced bracket at {lb}")
            pos = lb + 1
            continue
        raw = text[lb:end]
        marker = _build_bracket_marker(raw, (lb, end), head, warnings)
        if marker is None:
            pos = lb + 1
            continue
        markers.append(marker)
        pos = end

    taken = [m.span for m in markers]

    def inside_taken(i: int) -> bool:
        return any(s <= i < e for s, e in taken)

    # Pass 2: bare terminal forms outside any bracketed span.  The payload
    # runs to the next bracketed marker or end of message, and a later bare
    # head inside that run is part of the payload.
    for match in _LINE_HEAD_RE.finditer(text):
        start = match.start(1)
        if inside_taken(start):
            continue
        nxt = min((s for s, _ in taken if s > start), default=len(text))
        raw = text[start:nxt]
        payload = raw[len(match.group(1)):].strip()
        kind = _LINE_HEADS[match.group(1)]
        markers.append(Marker(kind, TextPayload(payload), (start, nxt), raw))
        taken.append((start, nxt))

    markers.sort(key=lambda m: m.span[0])

    residual_parts: list[str] = []
    cursor = 0
    for m in markers:
        residual_parts.append(text[cursor:m.span[0]])
        cursor = m.span[1]
    residual_parts.append(text[cursor:])

    return MarkerStream(markers, "".join(residual_parts), warnings)


def reconstruct(stream: MarkerStream) -> str:
    """Inverse of :func:`parse_markers`: rebuild the source byte-for-byte."""
    out: list[str] = []
    cursor = 0  # position in residual_text
    consumed = 0  # marker bytes re-inserted so far
    for m in sorted(stream.items, key=lambda x: x.span[0]):
        plain = m.span[0] - consumed
        out.append(stream.residual_text[cursor:plain])
        out.append(m.raw)
        cursor = plain
        consumed += len(m.raw)
    out.append(stream.residual_text[cursor:])
    return "".join(out)


def serialize_marker(marker: Marker) -> str:
    """Canonical bracketed form of a marker (escapes ``|`` in values)."""

    def esc(s: str) -> str:
        return s.replace("|", "\\|")

    p = marker.payload
    if marker.kind == TOOL_CALL:
        assert isinstance(p, ToolCallPayload)
        parts = [esc(p.instruction), f"type: {esc(p.raw_type)}"]
        if p.context:
            parts.append(f"context: {esc(p.context)}")
        return "[TOOL_CALL: " + " | ".join(parts) + "]"
    if marker.kind == SKILL:
        assert isinstance(p, SkillPayload)
        parts = [esc(p.name)] + [f"{k}: {esc(v)}" for k, v in p.params.items()]
        return "[SKILL: " + " | ".join(parts) + "]"
    assert isinstance(p, TextPayload)
    head = "FINAL_ANSWER" if marker.kind == FINAL_ANSWER else "INTERVENTION_NEEDED"
    return f"[{head}: {esc(p.text)}]"


def extract_thinking(text: str) -> ThinkingSplit:
    """Split ``<think>``-delimited reasoning from visible text.

    All delimited segments concatenate (newline-joined) into ``thinking``.
    An unterminated ``<think>`` treats the remainder as thinking; a stray
    ``</think>`` with no opener treats the text before it as thinking.
    The visible part never contains a delimiter token.
    """
    thinking: list[str] = []
    visible: list[str] = []
    pos = 0
    while pos < len(text):
        op = text.find(_THINK_OPEN, pos)
        cl = text.find(_THINK_CLOSE, pos)
        if op < 0 and cl < 0:
            visible.append(text[pos:])
            break
        if cl >= 0 and (op < 0 or cl < op):
            # Stray closer: everything before it was implicit thinking.
            seg = text[pos:cl]
            if seg:
                thinking.append(seg)
            pos = cl + len(_THINK_CLOSE)
            continue
        visible.append(text[pos:op])
        body_start = op + len(_THINK_OPEN)
        end = text.find(_THINK_CLOSE, body_start)
        if end < 0:
            thinking.append(text[body_start:])
            pos = len(text)
        else:
            thinking.append(text[body_start:end])
            pos = end + len(_THINK_CLOSE)
    return ThinkingSplit("\n".join(thinking), "".join(visible))
