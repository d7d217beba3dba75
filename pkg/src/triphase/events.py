"""Run event envelopes: 17 kinds, per-run gap-free sequences, replay.

Every observable step of a run emits one envelope. The log keeps the
full history for seq-based replay and blocks live tails on a condition
variable, so a reconnecting consumer resumes from any sequence number
without gaps or duplicates.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

PHASE_TRANSITION = "phase_transition"
THINKING = "thinking"
PLAN_READY = "plan_ready"
REVIEW_FEEDBACK = "review_feedback"
QUALITY_SCORED = "quality_scored"
MODEL_SELECTED = "model_selected"
MODEL_SWITCH = "model_switch"
TOOL_STARTED = "tool_started"
TOOL_FINISHED = "tool_finished"
PERMISSION_PROMPT = "permission_prompt"
PERMISSION_RESOLVED = "permission_resolved"
INTERVENTION_NEEDED = "intervention_needed"
INTERVENTION_RESOLVED = "intervention_resolved"
CONCLUSION = "conclusion"
MEMORY_STORED = "memory_stored"
SKILL_LEARNED = "skill_learned"
ERROR = "error"

EVENT_KINDS = (
    PHASE_TRANSITION, THINKING, PLAN_READY, REVIEW_FEEDBACK, QUALITY_SCORED,
    MODEL_SELECTED, MODEL_SWITCH, TOOL_STARTED, TOOL_FINISHED,
    PERMISSION_PROMPT, PERMISSION_RESOLVED, INTERVENTION_NEEDED,
    INTERVENTION_RESOLVED, CONCLUSION, MEMORY_STORED, SKILL_LEARNED, ERROR,
)

TERMINAL_KINDS = (CONCLUSION, ERROR)

# Kinds allowed after the terminal event (rating-driven epilogue).
EPILOGUE_KINDS = (SKILL_LEARNED,)


@dataclass
class EventEnvelope:
    run_id: str
    seq: int
    kind: str
    payload: dict
    at: float

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "EventEnvelope":
        return cls(**d)


class EventLog:
    """Ordered, append-only event log for one run."""

    def __init__(self, run_id: str,
                 wall_clock: Callable[[], float] = time.time) -> None:
        self.run_id = run_id
        self.wall_clock = wall_clock
        self._events: list[EventEnvelope] = []
        self._cond = threading.Condition()
        self._closed = False
        self.on_emit: Callable[[EventEnvelope], None] | None = None

    def emit(self, kind: str, **payload) -> EventEnvelope:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        with self._cond:
            env = EventEnvelope(run_id=self.run_id, seq=len(self._events),
                                kind=kind, payload=payload,
                                at=self.wall_clock())
            self._events.append(env)
            self._cond.notify_all()
        if self.on_emit is not None:
            self.on_emit(env)
        return env

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        with self._cond:
            return self._closed

    def events(self, from_seq: int = 0) -> list[EventEnvelope]:
        with self._cond:
            return self._events[from_seq:]

    def stream(self, from_seq: int = 0,
               poll: float = 0.05) -> Iterator[EventEnvelope]:
        """Replay from from_seq, then tail live until the log closes."""
        cursor = max(0, from_seq)
        while True:
            with self._cond:
                while cursor >= len(self._events) and not self._closed:
                    self._cond.wait(poll)
                batch = self._events[cursor:]
                done = self._closed and not batch
            if done:
                return
            for env in batch:
                yield env
                cursor = env.seq + 1

    def to_transcript(self) -> str:
        return "\n".join(json.dumps(e.to_json()) for e in self.events())

    @staticmethod
    def from_transcript(text: str) -> list[EventEnvelope]:
        return [EventEnvelope.from_json(json.loads(line))
                for line in text.splitlines() if line.strip()]


@dataclass
class SequenceReport:
    ok: bool
    problems: list[str] = field(default_factory=list)


def validate_run_events(events: list[EventEnvelope]) -> SequenceReport:
    """Check a finished run's stream against the canonical pattern.

    phase_transition(discussion), then at least one quality_scored,
    an optional single phase_transition(switch) before any tool runs,
    strictly paired tool_started/tool_finished, exactly one terminal
    conclusion|error, and only rating epilogue events afterwards.
    """
    problems: list[str] = []
    if not events:
        return SequenceReport(False, ["empty stream"])

    for i, env in enumerate(events):
        if env.seq != i:
            problems.append(f"seq gap at index {i}: got {env.seq}")
            break

    first = events[0]
    if first.kind != PHASE_TRANSITION or \
            first.payload.get("phase") != "discussion":
        problems.append("stream must open with phase_transition(discussion)")

    terminal_idxs = [i for i, e in enumerate(events)
                     if e.kind in TERMINAL_KINDS]
    if len(terminal_idxs) != 1:
        problems.append(
            f"expected exactly one terminal event, found {len(terminal_idxs)}")
    else:
        term = terminal_idxs[0]
        for env in events[term + 1:]:
            if env.kind not in EPILOGUE_KINDS:
                problems.append(
                    f"non-epilogue event {env.kind} after terminal")

    first_tool = next((i for i, e in enumerate(events)
                       if e.kind == TOOL_STARTED), None)
    scored = [i for i, e in enumerate(events) if e.kind == QUALITY_SCORED]
    if first_tool is not None:
        if not scored or min(scored) > first_tool:
            problems.append("tool execution before any quality_scored")

    switches = [i for i, e in enumerate(events)
                if e.kind == PHASE_TRANSITION
                and e.payload.get("phase") == "switch"]
    if len(switches) > 1:
        problems.append("more than one switch transition")
    if switches and first_tool is not None and switches[0] > first_tool:
        problems.append("switch transition after tool execution began")
    if switches and scored and switches[0] < min(scored):
        problems.append("switch transition before any quality_scored")

    open_tool = False
    for env in events:
        if env.kind == TOOL_STARTED:
            if open_tool:
                problems.append("tool_started while a tool was open")
                break
            open_tool = True
        elif env.kind == TOOL_FINISHED:
            if not open_tool:
                problems.append("tool_finished without tool_started")
                break
            open_tool = False
    if open_tool:
        problems.append("tool_started without matching tool_finished")

    return SequenceReport(not problems, problems)
