"""Shared scripted-pipeline builders for integration tests."""

from __future__ import annotations

from triphase.events import EventLog
from triphase.memomap import MemoMap
from triphase.modelhub import ModelProfile, SessionRegistry
from triphase.pipeline import (
    InterventionChannel,
    PipelineConfig,
    PipelineRunner,
    RoleSet,
    RoleSpec,
)
from triphase.providers import ScriptedProvider
from triphase.router import PermissionPolicy
from triphase.skillstore import SkillStore
from triphase.toolkit.handlers import ToolkitContext, build_default_router

GOOD_REVIEW = "score: 0.85\nISSUES:\nnone\nSUGGESTIONS:\nnone"


def profile_for(role: str, caps=("completion", "tools"),
                vram: float = 1000.0, params_b: float = 8.0) -> ModelProfile:
    return ModelProfile(name=f"scripted-{role}", params_b=params_b,
                        native_ctx=32768, capabilities=tuple(caps),
                        vram_by_quant={"q4": vram})


class ScriptedStack:
    """A full engine stack around one ScriptedProvider."""

    def __init__(self, tmp_path, scripts, *, capacity=100_000.0,
                 config: PipelineConfig | None = None,
                 policy: PermissionPolicy | None = None,
                 intervention: InterventionChannel | None = None,
                 with_executor=False, executor_caps=("completion", "tools"),
                 with_tools=False, planner_vram=1000.0,
                 reviewer_vram=1000.0, toolkit: ToolkitContext | None = None):
        self.provider = ScriptedProvider(scripts)
        self.roles = RoleSet(
            planner=RoleSpec(profile_for("planner", vram=planner_vram),
                             self.provider),
            reviewer=RoleSpec(profile_for("reviewer", vram=reviewer_vram),
                              self.provider),
            executor=RoleSpec(profile_for("executor", executor_caps),
                              self.provider) if with_executor else None,
            tools=RoleSpec(profile_for("tools"), self.provider)
            if with_tools else None)
        self.router = build_default_router(toolkit or ToolkitContext())
        self.memomap = MemoMap(tmp_path / "mem")
        self.skills = SkillStore(tmp_path / "skills")
        self.registry = SessionRegistry(capacity)
        self.runner = PipelineRunner(
            self.router, self.memomap, self.skills, self.registry,
            config=config, policy=policy, intervention=intervention)
        self.log = EventLog(run_id="t-run")

    def run(self, request: str):
        return self.runner.run(request, self.roles, self.log)

    def planner_inputs(self) -> list[str]:
        return [c["messages"][-1]["content"]
                for c in self.provider.ops("chat")
                if c["model"] == "scripted-planner"]

    def kinds(self) -> list[str]:
        return [e.kind for e in self.log.events()]
