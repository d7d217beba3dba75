"""Three-phase orchestration: discuss, switch, execute.

Phase 1 loops planner and reviewer until the adjusted quality score
clears the threshold or rounds run out; no tool ever executes here.
Four guards adjust the reviewer's raw score: forbidden phrases zero it,
memory recycling caps it at 0.30, score/text contradiction clamps it to
0.40, and numeric contradictions inject warnings for the next round.

Phase 2 picks the execution mode: purely generative plans answer
directly, plans with at most four tool calls reuse the planner, and
larger plans switch models (release discussion sessions, load the
executor, rebuild context).

Phase 3 drives the executor step loop: markers parsed, skill context
prepended on the first step, tool calls routed with permission gating,
search calls deduplicated against a per-run cache with a hard limit,
premature conclusions retried once, interventions parking the run until
guidance arrives. Results feed the next step with their timestamps.
"""

from __future__ import annotations

import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable

from triphase import events as ev
from triphase import markers
from triphase.events import EventLog
from triphase.memomap import (
    MemoMap,
    MemoryEntry,
    info_tokens,
    nontrivial_numbers,
)
from triphase.modelhub import (
    ModelHubError,
    ModelProfile,
    ModelSession,
    SessionRegistry,
    soul_for_role,
    thinking_mode_for,
)
from triphase.router import PermissionPolicy, Router, ToolCall, ToolResult
from triphase.skillstore import ExecutedCall, ExecutionRecord, SkillStore

DEFAULT_FORBIDDEN_PHRASES = (
    "i cannot browse",
    "unable to access",
    "as an ai",
    "i don't have access",
    "cannot access the internet",
    "i am not able to browse",
)

DEFAULT_REJECTION_PHRASES = ("does not meet", "insufficient", "lacks")


@dataclass
class PipelineConfig:
    max_rounds: int = 3
    quality_threshold: float = 0.70
    max_exec_steps: int = 10
    simple_plan_max_calls: int = 4
    search_limit: int = 10
    search_overlap: float = 0.70
    forbidden_phrases: tuple[str, ...] = DEFAULT_FORBIDDEN_PHRASES
    rejection_phrases: tuple[str, ...] = DEFAULT_REJECTION_PHRASES
    duplication_overlap: float = 0.40
    duplication_min_hits: int = 3
    duplication_min_shared_numbers: int = 2

    def __post_init__(self) -> None:
        if not 0 < self.quality_threshold <= 1:
            raise ValueError("quality_threshold must be in (0, 1]")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass
class PlanRecord:
    text: str
    tool_calls: list[markers.Marker]
    round_index: int
    generative: bool = False
    has_tool_indicators: bool = False

    @classmethod
    def from_text(cls, text: str, round_index: int) -> "PlanRecord":
        stream = markers.parse_markers(text)
        return cls(text=text, tool_calls=stream.tool_calls,
                   round_index=round_index)


@dataclass
class ReviewRecord:
    raw_score: float
    adjusted_score: float
    guards_fired: set[str] = field(default_factory=set)
    issues: str = ""
    suggestions: str = ""
    warnings: list[str] = field(default_factory=list)


@dataclass
class ConclusionRecord:
    text: str
    source: str  # planner | reviewer | executor
    language: str = "en"


class PipelineError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


# ---------------------------------------------------------------------------
# search cache
# ---------------------------------------------------------------------------

@dataclass
class CacheDecision:
    status: str  # fresh | dedup_hit | limit_blocked
    cached: ToolResult | None = None


class SearchCache:
    """Per-run query dedup (min-set word overlap) plus a hard limit."""

    def __init__(self, limit: int = 10, overlap: float = 0.70) -> None:
        self.limit = limit
        self.overlap = overlap
        self.entries: list[tuple[frozenset[str], ToolResult]] = []
        self.count = 0

    @staticmethod
    def _words(query: str) -> frozenset[str]:
        return frozenset(w for w in re.findall(r"[a-z0-9]+", query.lower()))

    def admit(self, query: str) -> CacheDecision:
        words = self._words(query)
        for cached_words, result in self.entries:
            if not words or not cached_words:
                continue
            overlap = len(words & cached_words) / min(len(words),
                                                      len(cached_words))
            if overlap >= self.overlap:
                return CacheDecision("dedup_hit", result)
        if self.count >= self.limit:
            return CacheDecision("limit_blocked")
        self.count += 1
        return CacheDecision("fresh")

    def store(self, query: str, result: ToolResult) -> None:
        self.entries.append((self._words(query), result))


# ---------------------------------------------------------------------------
# review gate
# ---------------------------------------------------------------------------

_SCORE_RE = re.compile(r"score\w*\s*[:=]?\s*([01]?\.\d+|[01](?:\.\d+)?)",
                       re.IGNORECASE)


def parse_review_score(review_text: str) -> tuple[float, bool]:
    """First decimal in [0,1] after a 'score' token; absent -> (0.0, True)."""
    for m in _SCORE_RE.finditer(review_text):
        try:
            value = float(m.group(1))
        except ValueError:
            continue
        if 0.0 <= value <= 1.0:
            return value, False
    return 0.0, True


def _split_feedback(review_text: str) -> tuple[str, str]:
    issues: list[str] = []
    suggestions: list[str] = []
    bucket = None
    for line in review_text.splitlines():
        header = line.strip().lower().rstrip(":")
        if header == "issues":
            bucket = issues
            continue
        if header == "suggestions":
            bucket = suggestions
            continue
        if bucket is not None and line.strip():
            bucket.append(line.strip())
    return "\n".join(issues), "\n".join(suggestions)


def review_gate(plan: PlanRecord, review_text: str, raw_score: float,
                loaded_memory: list[MemoryEntry],
                tool_results_so_far: list[str],
                memomap: MemoMap | None = None,
                config: PipelineConfig | None = None) -> ReviewRecord:
    """Apply the four anti-hallucination guards in order."""
    cfg = config or PipelineConfig()
    issues, suggestions = _split_feedback(review_text)
    record = ReviewRecord(raw_score=raw_score, adjusted_score=raw_score,
                          issues=issues or review_text.strip(),
                          suggestions=suggestions)

    # Guard 1: forbidden phrases zero the plan outright.
    plan_lower = plan.text.lower()
    for phrase in cfg.forbidden_phrases:
        if phrase in plan_lower:
            record.guards_fired.add("forbidden_phrase")
            record.adjusted_score = 0.0
            record.warnings.append(f"forbidden phrase in plan: {phrase!r}")
            break

    # Guard 2: memory duplication (token recycling without tool calls).
    memory_text = "\n".join(e.content for e in loaded_memory)
    if memory_text:
        mem_tokens = info_tokens(memory_text)
        plan_tokens = info_tokens(plan.text)
        hits = len(mem_tokens & plan_tokens)
        overlap = hits / len(mem_tokens) if mem_tokens else 0.0
        if (overlap >= cfg.duplication_overlap
                and hits >= cfg.duplication_min_hits
                and len(plan.tool_calls) == 0):
            record.guards_fired.add("memory_duplication")
            record.adjusted_score = min(record.adjusted_score, 0.30)
            record.warnings.append(
                f"plan recycles {hits} memory tokens "
                f"({overlap:.0%} overlap) without any tool call")
        shared_numbers = nontrivial_numbers(plan.text) \
            & nontrivial_numbers(memory_text)
        if len(shared_numbers) >= cfg.duplication_min_shared_numbers:
            record.warnings.append(
                "plan repeats remembered numbers without re-verification: "
                + ", ".join(sorted(shared_numbers)))

    # Guard 3: the reviewer rejects in words but approves in number.
    text_lower = review_text.lower()
    rejection_hits = sum(text_lower.count(p) for p in cfg.rejection_phrases)
    if rejection_hits >= 2 and raw_score >= 0.60:
        record.guards_fired.add("score_text_contradiction")
        record.adjusted_score = min(record.adjusted_score, 0.40)
        record.warnings.append(
            f"review uses {rejection_hits} rejection phrases but scored "
            f"{raw_score:.2f}; clamped")

    # Guard 4: fresh tool results contradict loaded memory.
    if memomap is not None and tool_results_so_far:
        flags = memomap.detect_contradictions(tool_results_so_far,
                                              loaded_memory)
        if flags:
            record.guards_fired.add("memory_contradiction")
            record.warnings.extend(f.warning for f in flags)

    return record


# ---------------------------------------------------------------------------
# request classification / mode decision
# ---------------------------------------------------------------------------

_GENERATIVE_RE = re.compile(
    r"\b(write|compose|draft|generate|invent)\b.*?"
    r"\b(stor(y|ies)|poem|poetry|essay|song|haiku|lyrics|joke|code|script|"
    r"table|article|letter|novel|tale)\b"
    r"|\b(stor(y|ies)|poem|haiku|essay)\b",
    re.IGNORECASE | re.DOTALL)

_TOOL_INDICATOR_RE = re.compile(
    r"\b(save|write (it )?to|file_write|run|execute|debug|search|browse|"
    r"download|open (the )?app|click|TOOL_CALL)\b",
    re.IGNORECASE)


def classify_request(request: str, plan_text: str) -> tuple[bool, bool]:
    """(generative, has_tool_indicators) via deterministic patterns."""
    generative = bool(_GENERATIVE_RE.search(request))
    indicators = bool(_TOOL_INDICATOR_RE.search(plan_text))
    return generative, indicators


def decide_execution_mode(plan: PlanRecord,
                          config: PipelineConfig | None = None) -> str:
    """direct_output | reuse_planner | switch_models."""
    cfg = config or PipelineConfig()
    if plan.generative and not plan.has_tool_indicators:
        return "direct_output"
    if len(plan.tool_calls) <= cfg.simple_plan_max_calls:
        return "reuse_planner"
    return "switch_models"


# ---------------------------------------------------------------------------
# conclusion selection
# ---------------------------------------------------------------------------

_PLANNING_LIKE_RE = re.compile(
    r"^\s*(to provide|step\s*\d|first,|i will\b|plan\s*:|\d+\.\s)",
    re.IGNORECASE)

_META_REVIEW_RE = re.compile(r"\b(plan|planner)\b", re.IGNORECASE)


def _substantive(text: str) -> bool:
    stripped = text.strip()
    if not stripped:
        return False
    if _PLANNING_LIKE_RE.match(stripped):
        return False
    return bool(re.search(r"[.!?]", stripped)) or len(stripped.split()) >= 3


def strip_meta_review(review_text: str) -> str:
    """Drop sentences addressed to the planner (naming plan/Planner)."""
    sentences = re.split(r"(?<=[.!?])\s+", review_text.strip())
    kept = [s for s in sentences if s and not _META_REVIEW_RE.search(s)]
    return " ".join(kept).strip()


def detect_language(text: str) -> str:
    from triphase.skillstore import contains_cjk
    return "zh" if contains_cjk(text) else "en"


def plan_final_answer(plan_text: str) -> str | None:
    """FINAL_ANSWER payload inside a plan, if the planner emitted one."""
    stream = markers.parse_markers(plan_text)
    marker = stream.first(markers.FINAL_ANSWER)
    return marker.payload.text if marker else None


def select_conclusion(planner_final: str | None, reviewer_text: str | None,
                      last_executor_text: str | None,
                      language: str = "en") -> ConclusionRecord:
    """Priority chain: substantive planner text, reviewer minus meta
    commentary, then the last executor output."""
    if planner_final and _substantive(planner_final):
        return ConclusionRecord(planner_final.strip(), "planner", language)
    if reviewer_text:
        stripped = strip_meta_review(reviewer_text)
        if stripped:
            return ConclusionRecord(stripped, "reviewer", language)
    if last_executor_text and last_executor_text.strip():
        return ConclusionRecord(last_executor_text.strip(), "executor",
                                language)
    raise PipelineError("no_candidates", "no conclusion candidate available")


# ---------------------------------------------------------------------------
# intervention channel
# ---------------------------------------------------------------------------

class InterventionChannel:
    """Parks a run until guidance arrives (or an optional deadline)."""

    def __init__(self, timeout: float | None = None,
                 clock: Callable[[], float] = time.monotonic,
                 poll: float = 0.02) -> None:
        self.timeout = timeout
        self.clock = clock
        self.poll = poll
        self._cond = threading.Condition()
        self._pending: dict[str, dict] = {}

    def pending(self) -> list[dict]:
        with self._cond:
            return [dict(p) for p in self._pending.values()
                    if p["guidance"] is None]

    def request(self, run_id: str, prompt: str) -> str | None:
        entry = {"id": uuid.uuid4().hex[:12], "run_id": run_id,
                 "prompt": prompt, "guidance": None}
        deadline = None if self.timeout is None \
            else self.clock() + self.timeout
        with self._cond:
            self._pending[entry["id"]] = entry
            while entry["guidance"] is None:
                if deadline is not None and self.clock() >= deadline:
                    del self._pending[entry["id"]]
                    return None
                self._cond.wait(self.poll)
            del self._pending[entry["id"]]
            return entry["guidance"]

    def resolve(self, run_id: str, guidance: str) -> bool:
        with self._cond:
            for entry in self._pending.values():
                if entry["run_id"] == run_id and entry["guidance"] is None:
                    entry["guidance"] = guidance
                    self._cond.notify_all()
                    return True
        return False


class ScriptedInterventionChannel(InterventionChannel):
    def __init__(self, answers: list[str | None]) -> None:
        super().__init__()
        self.answers = list(answers)
        self.requests: list[str] = []

    def request(self, run_id: str, prompt: str) -> str | None:
        self.requests.append(prompt)
        if not self.answers:
            return None
        return self.answers.pop(0)


# ---------------------------------------------------------------------------
# role/session wiring
# ---------------------------------------------------------------------------

@dataclass
class RoleSpec:
    profile: ModelProfile
    provider: object


@dataclass
class RoleSet:
    planner: RoleSpec
    reviewer: RoleSpec
    executor: RoleSpec | None = None
    tools: RoleSpec | None = None

    def names(self) -> dict[str, str]:
        out = {"planner": self.planner.profile.name,
               "reviewer": self.reviewer.profile.name}
        if self.executor:
            out["executor"] = self.executor.profile.name
        if self.tools:
            out["tools"] = self.tools.profile.name
        return out


@dataclass
class RunOutcome:
    run_id: str
    conclusion: ConclusionRecord | None
    error: str | None = None
    error_kind: str | None = None
    rounds: list[dict] = field(default_factory=list)
    steps: list[dict] = field(default_factory=list)
    executed_calls: list[ExecutedCall] = field(default_factory=list)
    skills_used: list[str] = field(default_factory=list)
    request: str = ""
    session_entry_id: str | None = None
    pipeline_entry_id: str | None = None
    plan: PlanRecord | None = None
    search_cache: SearchCache | None = None

    @property
    def ok(self) -> bool:
        return self.conclusion is not None


class PipelineRunner:
    """Drives one request through the three phases.

    One runner instance serves one run: it tracks the model sessions it
    acquired and releases exactly those when the run ends, so concurrent
    runs sharing a registry never unload each other's models.
    """

    def __init__(self, router: Router, memomap: MemoMap,
                 skills: SkillStore, registry: SessionRegistry,
                 config: PipelineConfig | None = None,
                 policy: PermissionPolicy | None = None,
                 intervention: InterventionChannel | None = None,
                 soul_text: str | None = None,
                 wall_clock: Callable[[], float] = time.time) -> None:
        self.router = router
        self.memomap = memomap
        self.skills = skills
        self.registry = registry
        self.config = config or PipelineConfig()
        self.policy = policy or PermissionPolicy()
        self.intervention = intervention or InterventionChannel(timeout=300.0)
        self.soul_text = soul_text
        self.wall_clock = wall_clock
        self._owned: list[ModelSession] = []

    # -- session helpers ------------------------------------------------------

    def _acquire(self, role: str, spec: RoleSpec) -> ModelSession:
        session = self.registry.acquire(role, spec.profile, spec.provider)
        self._owned.append(session)
        return session

    def _release(self, session: ModelSession | None) -> None:
        if session is None:
            return
        self.registry.release(session)
        if session in self._owned:
            self._owned.remove(session)

    def _ensure_discussion(self, role: str, spec: RoleSpec,
                           slots: dict[str, ModelSession | None],
                           log: EventLog) -> ModelSession:
        """Ensure a discussion session is resident, swapping out its peer
        when the VRAM capacity cannot hold both (implicit weight swap)."""
        if slots.get(role) is not None:
            return slots[role]
        try:
            session = self._acquire(role, spec)
        except ModelHubError as exc:
            if exc.kind != "insufficient_vram":
                raise
            for other_role, other in list(slots.items()):
                if other is not None and other_role != role:
                    self._release(other)
                    slots[other_role] = None
            log.emit(ev.MODEL_SWITCH, reason="capacity swap", loading=role,
                     model=spec.profile.name)
            session = self._acquire(role, spec)
        slots[role] = session
        return session

    def _emit_thinking(self, log: EventLog, role: str, text: str) -> str:
        split = markers.extract_thinking(text)
        if split.thinking:
            log.emit(ev.THINKING, role=role, text=split.thinking)
        return split.visible

    # -- main entry -------------------------------------------------------------

    def run(self, request: str, roles: RoleSet, log: EventLog,
            run_id: str | None = None) -> RunOutcome:
        run_id = run_id or log.run_id
        outcome = RunOutcome(run_id=run_id, conclusion=None, request=request)
        cache = SearchCache(limit=self.config.search_limit,
                            overlap=self.config.search_overlap)
        outcome.search_cache = cache
        language = detect_language(request)

        log.emit(ev.PHASE_TRANSITION, phase="discussion")
        log.emit(ev.MODEL_SELECTED, roles=roles.names())

        bundle = self.memomap.retrieve_context(request)
        loaded_memory = bundle.all_entries()

        slots: dict[str, ModelSession | None] = {"planner": None,
                                                 "reviewer": None}
        tool_result_texts: list[str] = []

        try:
            plan, review = self._discussion(
                request, roles, log, bundle, loaded_memory,
                tool_result_texts, slots, outcome)
            if plan is None:
                self._finish_error(outcome, log, "discussion_exhausted",
                                   "no plan cleared the quality threshold")
                return outcome

            mode = decide_execution_mode(plan, self.config)
            outcome.plan = plan

            executor_session = self._enter_execution(mode, roles, log, slots)

            final_text, last_visible = self._execution_loop(
                request, plan, review, mode, executor_session, roles, log,
                cache, tool_result_texts, outcome)

            conclusion = self._conclude(
                final_text, plan, review, last_visible, mode, language)
            self._store_memory(request, plan, review, conclusion, outcome,
                               log)
            log.emit(ev.CONCLUSION, text=conclusion.text,
                     source=conclusion.source, language=conclusion.language)
            outcome.conclusion = conclusion
            return outcome
        except PipelineError as exc:
            self._finish_error(outcome, log, exc.kind, str(exc))
            return outcome
        except ModelHubError as exc:
            self._finish_error(outcome, log, "provider_error", str(exc))
            return outcome
        finally:
            for session in list(self._owned):
                self._release(session)
            log.close()

    # -- phase 1 ------------------------------------------------------------------

    def _discussion(self, request, roles, log, bundle, loaded_memory,
                    tool_result_texts, slots, outcome):
        feedback = ""
        contradiction_notes: list[str] = []
        plan: PlanRecord | None = None
        review: ReviewRecord | None = None

        for round_index in range(1, self.config.max_rounds + 1):
            planner_session = self._ensure_discussion(
                "planner", roles.planner, slots, log)

            memory_block = "\n".join(
                f"[memory {e.kind}/{e.rating_internal}] {e.content}"
                for e in loaded_memory)
            prompt = "\n\n".join(filter(None, [
                soul_for_role("planner", self.soul_text),
                f"User request: {request}",
                f"Loaded memory:\n{memory_block}" if memory_block else "",
                bundle.anti_duplication_notice,
                f"Reviewer feedback to address:\n{feedback}" if feedback
                else "",
                "Produce a numbered plan; mark intended tool calls with "
                "[TOOL_CALL: instruction | type: category] markers.",
            ]))
            think = thinking_mode_for("complex", planner_session.profile)
            raw_plan = planner_session.generate(prompt, think=think)
            visible_plan = self._emit_thinking(log, "planner", raw_plan)
            plan = PlanRecord.from_text(visible_plan, round_index)
            plan.generative, plan.has_tool_indicators = classify_request(
                request, visible_plan)
            log.emit(ev.PLAN_READY, round=round_index, text=visible_plan,
                     tool_calls=len(plan.tool_calls))

            reviewer_session = self._ensure_discussion(
                "reviewer", roles.reviewer, slots, log)

            review_prompt = "\n\n".join(filter(None, [
                soul_for_role("reviewer", self.soul_text),
                f"User request: {request}",
                f"Plan to review:\n{visible_plan}",
                ("Warnings from contradiction checks:\n"
                 + "\n".join(contradiction_notes))
                if contradiction_notes else "",
                'Score the plan on one line as "score: X.XX", then ISSUES '
                "and SUGGESTIONS sections.",
            ]))
            raw_review = reviewer_session.generate(
                review_prompt,
                think=thinking_mode_for("complex", reviewer_session.profile))
            visible_review = self._emit_thinking(log, "reviewer", raw_review)
            raw_score, malformed = parse_review_score(visible_review)
            review = review_gate(plan, visible_review, raw_score,
                                 loaded_memory, tool_result_texts,
                                 self.memomap, self.config)
            if malformed:
                review.warnings.append("no score found in review; treated as 0.0")
            contradiction_notes = [w for w in review.warnings
                                   if "superseded" in w]
            log.emit(ev.REVIEW_FEEDBACK, round=round_index,
                     issues=review.issues, suggestions=review.suggestions,
                     warnings=review.warnings)
            log.emit(ev.QUALITY_SCORED, round=round_index,
                     raw=review.raw_score, adjusted=review.adjusted_score,
                     guards=sorted(review.guards_fired))
            outcome.rounds.append({
                "round": round_index, "plan": visible_plan,
                "review": visible_review, "raw_score": review.raw_score,
                "adjusted_score": review.adjusted_score,
                "guards": sorted(review.guards_fired)})

            if review.adjusted_score >= self.config.quality_threshold:
                return plan, review
            feedback = "\n".join(filter(None, [review.issues,
                                               review.suggestions]))
        return None, review

    # -- phase 2 ------------------------------------------------------------------

    def _enter_execution(self, mode, roles, log, slots):
        if mode == "switch_models":
            if roles.executor is None:
                raise PipelineError("provider_error",
                                    "switch requested but no executor role")
            # Four steps: plan already finalized; unload discussion
            # sessions; load the executor; context is rebuilt by the loop.
            for role in ("planner", "reviewer"):
                self._release(slots.get(role))
                slots[role] = None
            log.emit(ev.PHASE_TRANSITION, phase="switch")
            log.emit(ev.MODEL_SWITCH, reason="plan exceeds simple-plan size",
                     unloaded=[roles.planner.profile.name,
                               roles.reviewer.profile.name],
                     loading=roles.executor.profile.name)
            executor_session = self._acquire("executor", roles.executor)
            log.emit(ev.MODEL_SELECTED,
                     roles={"executor": roles.executor.profile.name})
            log.emit(ev.PHASE_TRANSITION, phase="execution")
            return executor_session

        # Reuse / direct: the planner session acts as the executor; make
        # sure it is resident (the reviewer may have swapped it out).
        log.emit(ev.PHASE_TRANSITION, phase="execution", mode=mode)
        return self._ensure_discussion("planner", roles.planner, slots, log)

    # -- phase 3 ------------------------------------------------------------------

    def _skill_context(self, request: str, plan: PlanRecord,
                       outcome: RunOutcome) -> str:
        matches = self.skills.search_skills(
            f"{request}\n{plan.text[:400]}", k=2)
        lines: list[str] = []
        for match in matches:
            if match.cosine_distance > 0.9:
                continue
            steps = self.skills.expand_procedure(match.skill)
            lines.append(f"Known skill {match.skill.name}:")
            lines.extend(f"  - {s}" for s in steps)
            outcome.skills_used.append(match.skill.name)
        return "\n".join(lines)

    def _route_tool_call(self, marker: markers.Marker, log: EventLog,
                         cache: SearchCache, outcome: RunOutcome,
                         tool_result_texts: list[str]) -> ToolResult:
        payload = marker.payload
        call = ToolCall(payload.instruction, payload.raw_type,
                        payload.context)
        routed = self.router.auto_correct(call)
        log.emit(ev.TOOL_STARTED, instruction=payload.instruction,
                 raw_type=payload.raw_type, canonical=routed.canonical,
                 corrections=[c.reason for c in routed.corrections])

        if routed.canonical == "web_search":
            decision = cache.admit(routed.instruction)
            if decision.status == "dedup_hit":
                result = decision.cached
            elif decision.status == "limit_blocked":
                result = ToolResult(
                    ok=False, summary="search limit reached for this run",
                    body="the per-run hard limit of "
                         f"{self.config.search_limit} searches was hit",
                    timestamp=self.wall_clock(),
                    error_kind="search_limit")
            else:
                result = self.router.route(call, self.policy)
                if result.ok:
                    cache.store(routed.instruction, result)
        else:
            result = self.router.route(call, self.policy)

        log.emit(ev.TOOL_FINISHED, instruction=payload.instruction,
                 ok=result.ok, summary=result.summary,
                 strategy=result.strategy_used, error_kind=result.error_kind)
        outcome.executed_calls.append(ExecutedCall(
            instruction=payload.instruction, tool_type=routed.canonical,
            ok=result.ok))
        if result.ok:
            tool_result_texts.append(result.body)
        return result

    def _execution_loop(self, request, plan, review, mode, executor_session,
                        roles, log, cache, tool_result_texts, outcome):
        generative_direct = mode == "direct_output"
        skill_block = self._skill_context(request, plan, outcome)
        needs_translation = (
            "tools" not in executor_session.profile.capabilities
            and roles.tools is not None)
        tools_session = None

        context_parts = [
            soul_for_role("executor", self.soul_text),
            f"User request: {request}",
            f"Approved plan:\n{plan.text}",
        ]
        if skill_block:
            context_parts.append("Relevant skills:\n" + skill_block)
        if generative_direct:
            context_parts.append(
                "This is a purely generative task: produce the final "
                "content now and end with FINAL_ANSWER: and the content.")
        else:
            context_parts.append(
                "Execute the plan with [TOOL_CALL: ...] markers, one step "
                "at a time. Conclude with FINAL_ANSWER: when done.")

        final_text: str | None = None
        last_visible = ""
        retried_premature = False
        step = 0
        total_tool_calls = 0

        while step < self.config.max_exec_steps:
            step += 1
            prompt = "\n\n".join(context_parts)
            think = thinking_mode_for(
                "simple" if generative_direct else "complex",
                executor_session.profile)
            raw = executor_session.generate(prompt, think=think)
            visible = self._emit_thinking(log, "executor", raw)
            if needs_translation:
                if tools_session is None:
                    tools_session = self._acquire("tools", roles.tools)
                translated = tools_session.generate(
                    "Translate each action in the following step into "
                    "[TOOL_CALL: instruction | type: category] markers, "
                    "keeping any FINAL_ANSWER line:\n" + visible)
                visible = translated
            stream = markers.parse_markers(visible)
            last_visible = stream.residual_text.strip() or visible.strip()
            outcome.steps.append({"step": step, "text": visible,
                                  "tool_calls": len(stream.tool_calls)})

            final_marker = stream.first(markers.FINAL_ANSWER)
            intervention_marker = stream.first(markers.INTERVENTION)

            # Premature conclusion: step 1, nothing executed, not creative.
            if (final_marker is not None and step == 1
                    and not plan.generative and not retried_premature
                    and not stream.tool_calls and total_tool_calls == 0):
                retried_premature = True
                step -= 1
                context_parts.append(
                    "Correction: you concluded without executing any tool "
                    "call. Execute the plan's tool calls first, then "
                    "conclude.")
                continue

            # Tools run first so a same-step conclusion can use them.
            for marker in stream.tool_calls:
                result = self._route_tool_call(marker, log, cache, outcome,
                                               tool_result_texts)
                total_tool_calls += 1
                stamp = time.strftime("%Y-%m-%dT%H:%M:%S",
                                      time.localtime(result.timestamp))
                context_parts.append(
                    f"Result of [{marker.payload.instruction}] at {stamp}: "
                    f"{'ok' if result.ok else 'failed'} - {result.summary}\n"
                    f"{result.body[:2000]}")

            for skill_marker in stream.skills:
                skill = self.skills.get(skill_marker.payload.name)
                if skill is None:
                    context_parts.append(
                        f"Skill {skill_marker.payload.name!r} is unknown.")
                    continue
                steps = self.skills.expand_procedure(skill)
                outcome.skills_used.append(skill.name)
                context_parts.append(
                    f"Skill {skill.name} procedure:\n"
                    + "\n".join(f"  - {s}" for s in steps))

            if intervention_marker is not None:
                prompt_text = intervention_marker.payload.text
                log.emit(ev.INTERVENTION_NEEDED, prompt=prompt_text)
                guidance = self.intervention.request(log.run_id, prompt_text)
                if guidance is None:
                    raise PipelineError("intervention_timeout",
                                        "no guidance arrived in time")
                log.emit(ev.INTERVENTION_RESOLVED, prompt=prompt_text,
                         guidance=guidance)
                context_parts.append(f"User guidance: {guidance}")
                continue

            if final_marker is not None:
                final_text = final_marker.payload.text
                break

        if final_text is None and step >= self.config.max_exec_steps:
            # step_limit_exceeded: not a terminal failure; the conclusion
            # is forced from the best available text downstream.
            outcome.steps.append({
                "step": step,
                "note": f"step limit of {self.config.max_exec_steps} "
                        "reached; concluding from best available text"})
        return final_text, last_visible

    # -- wrap-up -------------------------------------------------------------------

    def _conclude(self, final_text, plan, review, last_visible, mode,
                  language) -> ConclusionRecord:
        """Execution-loop conclusions win; otherwise the priority chain
        over (plan's FINAL_ANSWER, reviewer text, last executor text)."""
        if final_text and final_text.strip():
            source = "planner" if mode == "direct_output" else "executor"
            return ConclusionRecord(final_text.strip(), source, language)
        plan_final = plan_final_answer(plan.text)
        reviewer_text = review.issues if review else ""
        return select_conclusion(plan_final, reviewer_text, last_visible,
                                 language)

    def _store_memory(self, request, plan, review, conclusion, outcome, log):
        session_id = self.memomap.store_entry(
            "session",
            f"request: {request}\nconclusion: {conclusion.text}",
            tags=[w for w in re.findall(r"[a-z]{4,}", request.lower())][:6])
        pipeline_id = self.memomap.store_entry(
            "pipeline",
            f"plan:\n{plan.text}\nscore: {review.adjusted_score:.2f}\n"
            f"calls: {len(outcome.executed_calls)}")
        outcome.session_entry_id = session_id
        outcome.pipeline_entry_id = pipeline_id
        log.emit(ev.MEMORY_STORED, session_entry=session_id,
                 pipeline_entry=pipeline_id)

    def _finish_error(self, outcome, log, kind, message):
        outcome.error = message
        outcome.error_kind = kind
        log.emit(ev.ERROR, error_kind=kind, detail=message)
