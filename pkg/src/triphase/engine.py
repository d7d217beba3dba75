"""Engine: run lifecycle, permission/intervention bridging, ratings, state.

One engine serves every interaction surface (REST, CLI, embedded), so a
task submitted anywhere follows the identical pipeline. Each session
holds at most one active run; runs execute on their own thread with a
per-run event log whose envelopes drive the RunHandle state machine.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from triphase import events as ev
from triphase.events import EventLog
from triphase.memomap import MemoMap, MemomapError
from triphase.modelhub import (
    ModelCatalog,
    ModelProfile,
    SessionRegistry,
    load_soul_asset,
)
from triphase.pipeline import (
    InterventionChannel,
    PipelineConfig,
    PipelineRunner,
    RoleSet,
    RoleSpec,
    RunOutcome,
)
from triphase.providers import ScriptedProvider, load_scripted_fixture
from triphase.router import PermissionGate, PermissionPolicy, Router
from triphase.runtime import PlannedTaskStore, PulseState, SoulStore
from triphase.skillstore import ExecutionRecord, Rejection, Skill, SkillStore
from triphase.toolkit.handlers import ToolkitContext, build_default_router

RUN_STATES = ("queued", "discussing", "switching", "executing",
              "awaiting_permission", "awaiting_intervention", "done",
              "failed")

_STATE_BY_EVENT = {
    ("phase_transition", "discussion"): "discussing",
    ("phase_transition", "switch"): "switching",
    ("phase_transition", "execution"): "executing",
}


class EngineError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


@dataclass
class RunHandle:
    run_id: str
    state: str = "queued"
    session: str = "default"
    created_at: float = 0.0
    deadline: float | None = None

    def to_json(self) -> dict:
        return {"run_id": self.run_id, "state": self.state,
                "session": self.session, "created_at": self.created_at,
                "deadline": self.deadline}


@dataclass
class RunState:
    handle: RunHandle
    log: EventLog
    runner: PipelineRunner
    roles: RoleSet
    request: str
    thread: threading.Thread | None = None
    outcome: RunOutcome | None = None
    rating: int | None = None


class Engine:
    def __init__(self, *, router: Router, memomap: MemoMap,
                 skills: SkillStore, registry: SessionRegistry,
                 catalog: ModelCatalog, roles: RoleSet,
                 config: PipelineConfig | None = None,
                 policy: PermissionPolicy | None = None,
                 gate: PermissionGate | None = None,
                 intervention: InterventionChannel | None = None,
                 soul: SoulStore | None = None,
                 tasks: PlannedTaskStore | None = None,
                 extra_models: dict[str, RoleSpec] | None = None,
                 wall_clock: Callable[[], float] = time.time) -> None:
        self.router = router
        self.memomap = memomap
        self.skills = skills
        self.registry = registry
        self.catalog = catalog
        self.default_roles = roles
        self.config = config or PipelineConfig()
        self.policy = policy or PermissionPolicy()
        self.gate = gate or router.gate
        self.intervention = intervention or InterventionChannel(timeout=None)
        self.soul = soul or SoulStore(load_soul_asset())
        self.tasks = tasks
        self.extra_models = extra_models or {}
        self.wall_clock = wall_clock
        self.pulse_state = PulseState(last_activity=wall_clock())

        self._lock = threading.Lock()
        self._runs: dict[str, RunState] = {}
        self._active_by_session: dict[str, str] = {}
        self._prompt_runs: dict[str, str] = {}
        self._tls = threading.local()
        self.correction_tasks: list = []

        self.gate.on_prompt = self._on_permission_prompt
        self.gate.on_resolved = self._on_permission_resolved

    # -- construction helpers ---------------------------------------------------

    @classmethod
    def scripted(cls, data_dir: str | Path, scripts: dict[str, list[str]],
                 role_models: dict[str, str] | None = None,
                 capacity_mb: float = 100_000.0,
                 toolkit: ToolkitContext | None = None,
                 router: Router | None = None,
                 **kw) -> "Engine":
        """Engine over one ScriptedProvider; model names default to
        scripted-<role>."""
        data_dir = Path(data_dir)
        provider = ScriptedProvider(scripts)
        role_models = role_models or {}

        def spec(role: str) -> RoleSpec:
            name = role_models.get(role, f"scripted-{role}")
            profile = ModelProfile(
                name=name, params_b=8, native_ctx=32768,
                capabilities=("completion", "tools"),
                vram_by_quant={"q4": 1000.0})
            return RoleSpec(profile, provider)

        has_executor = ("scripted-executor" in scripts
                        or "executor" in role_models)
        roles = RoleSet(planner=spec("planner"), reviewer=spec("reviewer"),
                        executor=spec("executor") if has_executor else None)
        return cls(
            router=build_default_router(toolkit or ToolkitContext(),
                                        router=router),
            memomap=MemoMap(data_dir / "memory"),
            skills=SkillStore(data_dir / "skills"),
            registry=SessionRegistry(capacity_mb),
            catalog=ModelCatalog(),
            roles=roles,
            tasks=PlannedTaskStore(data_dir / "tasks.json"),
            **kw)

    @classmethod
    def from_fixture(cls, data_dir: str | Path, fixture_dir: str | Path,
                     substitutions: dict[str, str] | None = None,
                     **kw) -> "Engine":
        manifest, provider = load_scripted_fixture(fixture_dir, substitutions)
        role_names = manifest.get("roles", {})
        scripts = provider.scripts
        engine = cls.scripted(data_dir, scripts,
                              role_models=role_names, **kw)
        return engine

    # -- run lifecycle -------------------------------------------------------------

    def available_models(self) -> set[str]:
        names = set(self.catalog.names())
        for spec in (self.default_roles.planner, self.default_roles.reviewer,
                     self.default_roles.executor, self.default_roles.tools):
            if spec is not None:
                names.add(spec.profile.name)
        names.update(self.extra_models)
        return names

    def _roles_with_overrides(self, overrides: dict[str, str]) -> RoleSet:
        base = self.default_roles
        if not overrides:
            return base
        available = self.available_models()
        chosen = {}
        for role, model in overrides.items():
            if role not in ("planner", "reviewer", "executor", "tools"):
                raise EngineError("invalid_config", f"unknown role {role!r}")
            if model not in available:
                raise EngineError("invalid_config",
                                  f"model {model!r} is not available")
            if model in self.extra_models:
                chosen[role] = self.extra_models[model]
                continue
            default_spec = getattr(base, role, None)
            provider = default_spec.provider if default_spec \
                else base.planner.provider
            profile = self.catalog.get(model)
            if profile is None and default_spec is not None:
                profile = default_spec.profile
            chosen[role] = RoleSpec(profile, provider)
        return RoleSet(
            planner=chosen.get("planner", base.planner),
            reviewer=chosen.get("reviewer", base.reviewer),
            executor=chosen.get("executor", base.executor),
            tools=chosen.get("tools", base.tools))

    def submit_task(self, request: str, overrides: dict | None = None,
                    session: str = "default") -> RunHandle:
        if not request or not request.strip():
            raise EngineError("invalid_config", "request must be non-empty")
        roles = self._roles_with_overrides(overrides or {})
        with self._lock:
            active = self._active_by_session.get(session)
            if active is not None:
                state = self._runs[active]
                if state.handle.state not in ("done", "failed"):
                    raise EngineError(
                        "engine_busy",
                        f"session {session} already has run {active}")
            run_id = uuid.uuid4().hex[:12]
            handle = RunHandle(run_id=run_id, session=session,
                               created_at=self.wall_clock())
            log = EventLog(run_id, wall_clock=self.wall_clock)
            log.on_emit = self._make_state_tracker(handle)
            runner = PipelineRunner(
                self.router, self.memomap, self.skills, self.registry,
                config=self.config, policy=self.policy,
                intervention=self.intervention,
                soul_text=self.soul.text(), wall_clock=self.wall_clock)
            state = RunState(handle=handle, log=log, runner=runner,
                             roles=roles, request=request.strip())
            self._runs[run_id] = state
            self._active_by_session[session] = run_id
        self.pulse_state.touch(self.wall_clock())

        thread = threading.Thread(target=self._run_thread, args=(state,),
                                  daemon=True)
        state.thread = thread
        thread.start()
        return handle

    def _run_thread(self, state: RunState) -> None:
        self._tls.log = state.log
        try:
            state.outcome = state.runner.run(state.request, state.roles,
                                             state.log)
        except Exception as exc:  # never let a run thread die silently
            state.handle.state = "failed"
            state.log.emit(ev.ERROR, error_kind="internal_error",
                           detail=repr(exc))
            state.log.close()
        finally:
            self._tls.log = None

    def _make_state_tracker(self, handle: RunHandle):
        def track(env) -> None:
            kind = env.kind
            if kind == ev.PHASE_TRANSITION:
                new = _STATE_BY_EVENT.get((kind, env.payload.get("phase")))
                if new:
                    handle.state = new
            elif kind == ev.PERMISSION_PROMPT:
                handle.state = "awaiting_permission"
                handle.deadline = env.payload.get("deadline")
            elif kind == ev.PERMISSION_RESOLVED:
                handle.state = "executing"
                handle.deadline = None
            elif kind == ev.INTERVENTION_NEEDED:
                handle.state = "awaiting_intervention"
            elif kind == ev.INTERVENTION_RESOLVED:
                handle.state = "executing"
            elif kind == ev.CONCLUSION:
                handle.state = "done"
            elif kind == ev.ERROR:
                handle.state = "failed"
        return track

    # -- permission / intervention bridging ------------------------------------------

    def _current_log(self) -> EventLog | None:
        return getattr(self._tls, "log", None)

    def _on_permission_prompt(self, prompt) -> None:
        log = self._current_log()
        if log is None:
            return
        self._prompt_runs[prompt.prompt_id] = log.run_id
        log.emit(ev.PERMISSION_PROMPT, prompt_id=prompt.prompt_id,
                 category=prompt.category, summary=prompt.summary,
                 deadline=prompt.deadline)

    def _on_permission_resolved(self, prompt) -> None:
        run_id = self._prompt_runs.get(prompt.prompt_id)
        state = self._runs.get(run_id) if run_id else None
        if state is None:
            return
        state.log.emit(ev.PERMISSION_RESOLVED, prompt_id=prompt.prompt_id,
                       decision=prompt.decision)

    def resolve_permission(self, run_id: str, prompt_id: str,
                           decision: str) -> str:
        state = self._require_run(run_id)
        if self._prompt_runs.get(prompt_id) != run_id:
            raise EngineError("unknown_prompt",
                              f"prompt {prompt_id} not part of run {run_id}")
        outcome = self.gate.resolve(prompt_id, decision)
        if outcome == "unknown":
            raise EngineError("unknown_prompt", f"no prompt {prompt_id}")
        return outcome

    def submit_intervention(self, run_id: str, guidance: str) -> str:
        state = self._require_run(run_id)
        if state.handle.state != "awaiting_intervention":
            raise EngineError("not_awaiting",
                              f"run {run_id} is {state.handle.state}")
        if not self.intervention.resolve(run_id, guidance):
            raise EngineError("not_awaiting",
                              f"run {run_id} has no pending intervention")
        return "accepted"

    # -- ratings ----------------------------------------------------------------------

    def rate_session(self, run_id: str, raw: int) -> dict:
        state = self._require_run(run_id)
        if state.handle.state not in ("done", "failed"):
            raise EngineError("not_done", f"run {run_id} is still active")
        if not isinstance(raw, int) or not 1 <= raw <= 10:
            raise EngineError("out_of_range", f"rating {raw!r} not in 1..10")
        outcome = state.outcome
        result = {"rating": raw, "skill_learned": None,
                  "corrections": []}
        if outcome and outcome.session_entry_id:
            try:
                self.memomap.apply_rating(outcome.session_entry_id, raw)
            except MemomapError as exc:
                raise EngineError(exc.kind, str(exc))
        state.rating = raw

        if outcome and outcome.ok:
            record = ExecutionRecord(
                request=state.request,
                summary=outcome.conclusion.text if outcome.conclusion else "",
                calls=outcome.executed_calls)
            learned = self.skills.learn_from_execution(record, raw)
            if isinstance(learned, Skill):
                result["skill_learned"] = learned.name
                state.log.emit(ev.SKILL_LEARNED, name=learned.name,
                               tags=learned.tags, origin=learned.origin)
        if outcome:
            for name in dict.fromkeys(outcome.skills_used):
                skill = self.skills.get(name)
                if skill is None:
                    continue
                task = self.skills.request_correction(skill, raw)
                if task is not None:
                    self.correction_tasks.append(task)
                    result["corrections"].append(task.skill_name)
        return result

    # -- queries -----------------------------------------------------------------------

    def _require_run(self, run_id: str) -> RunState:
        state = self._runs.get(run_id)
        if state is None:
            raise EngineError("unknown_run", f"no run {run_id}")
        return state

    def run_handle(self, run_id: str) -> RunHandle:
        return self._require_run(run_id).handle

    def run_log(self, run_id: str) -> EventLog:
        return self._require_run(run_id).log

    def run_outcome(self, run_id: str) -> RunOutcome | None:
        return self._require_run(run_id).outcome

    def wait(self, run_id: str, timeout: float = 60.0) -> RunHandle:
        state = self._require_run(run_id)
        if state.thread is not None:
            state.thread.join(timeout)
        return state.handle

    def query_state(self, selector: str) -> dict:
        if selector == "models":
            resident = [
                {"model": s.profile.name, "role": s.role,
                 "effective_ctx": s.effective_ctx,
                 "vram_mb": s.profile.vram_mb(s.quant)}
                for s in self.registry.resident_sessions()]
            return {"catalog": sorted(self.available_models()),
                    "resident": resident,
                    "capacity_mb": self.registry.capacity_mb}
        if selector == "memory":
            return {"counts": {k: self.memomap.count(k) for k in
                               ("session", "pipeline", "daily_summary",
                                "refined")},
                    "unconsolidated_days": self.memomap.unconsolidated_days()}
        if selector == "skills":
            return {"skills": [
                {"name": s.name, "origin": s.origin, "category": s.category,
                 "success_count": s.success_count,
                 "failure_count": s.failure_count}
                for s in self.skills.all_skills()]}
        if selector == "tasks":
            tasks = self.tasks.all() if self.tasks else []
            return {"tasks": [t.to_json() for t in tasks]}
        if selector == "config":
            cfg = self.config
            return {
                "max_rounds": cfg.max_rounds,
                "quality_threshold": cfg.quality_threshold,
                "max_exec_steps": cfg.max_exec_steps,
                "simple_plan_max_calls": cfg.simple_plan_max_calls,
                "search_limit": cfg.search_limit,
                "search_overlap": cfg.search_overlap,
                "forbidden_phrases": list(cfg.forbidden_phrases),
                "rejection_phrases": list(cfg.rejection_phrases),
                "policy": {"default": self.policy.default_level,
                           "levels": dict(self.policy.levels),
                           "ask_timeout": self.policy.ask_timeout},
            }
        raise EngineError("unknown_selector", f"no selector {selector!r}")
