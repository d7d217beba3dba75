"""Model catalog, VRAM-aware context budgeting, tiers, roles, sessions.

The effective context for a model invocation is the minimum of its
native window, any user-configured cap, and the VRAM-derived bound

    ctx_mem = floor(((vram_free * 0.85) - overhead) / c_kv) * 1000

where c_kv is the KV-cache cost in MB per 1K tokens, stepped by model
size. The 0.85 factor is a fragmentation safety margin. RAM spill is
reported but capped at twice free VRAM and never raises ctx_mem.

The session registry serializes load/unload transitions and refuses an
acquire that would push resident VRAM past the configured capacity.
"""

from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

PROMPT_ROLES = ("planner", "reviewer", "executor")
ALL_ROLES = PROMPT_ROLES + ("tools", "vision", "embedding")

VRAM_SAFETY_FACTOR = 0.85
DEFAULT_RUNTIME_RESERVE_MB = 512.0

TIER_BUDGETS = {
    "small": (733, 44),
    "medium": (1964, 623),
    "large": (2236, 1309),
}

SOUL_SECTIONS = {
    "planner": ["Identity", "Core Principles", "Autonomy",
                "Communication Style", "Boundaries", "Planner Behavior"],
    "reviewer": ["Identity", "Core Principles", "Communication Style",
                 "Boundaries", "Reviewer Behavior"],
    "executor": ["Identity", "Executor Behavior"],
}

TIER_SOUL_SECTIONS = {
    "small": ["Identity"],
    "medium": ["Identity", "Core Principles", "Communication Style",
               "Boundaries"],
    "large": ["Identity", "Core Principles", "Autonomy",
              "Communication Style", "Boundaries", "Planner Behavior",
              "Reviewer Behavior", "Executor Behavior"],
}


class ModelHubError(Exception):
    def __init__(self, kind: str, message: str) -> None:
        super().__init__(message)
        self.kind = kind


@dataclass
class ModelProfile:
    name: str
    params_b: float
    family: str = ""
    capabilities: tuple[str, ...] = ("completion",)
    native_ctx: int = 8192
    vram_by_quant: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.params_b <= 0:
            raise ValueError("params_b must be positive")
        if self.native_ctx <= 0:
            raise ValueError("native_ctx must be positive")
        if any(v <= 0 for v in self.vram_by_quant.values()):
            raise ValueError("vram estimates must be positive")

    def vram_mb(self, quant: str = "q4") -> float:
        if quant in self.vram_by_quant:
            return self.vram_by_quant[quant]
        if self.vram_by_quant:
            return next(iter(self.vram_by_quant.values()))
        raise ModelHubError("unknown_model",
                            f"no VRAM estimate for {self.name}")


@dataclass
class ContextBudget:
    ctx_native: int
    vram_free: float
    overhead: float
    c_kv: float
    ctx_user: int | None = None
    ram_spill_cap: float | None = None

    def __post_init__(self) -> None:
        if self.vram_free < 0 or self.overhead < 0:
            raise ValueError("MB values must be non-negative")
        if not 0.08 <= self.c_kv <= 1.2:
            raise ValueError(f"c_kv {self.c_kv} outside [0.08, 1.2]")
        cap = 2.0 * self.vram_free
        if self.ram_spill_cap is None:
            self.ram_spill_cap = cap
        elif self.ram_spill_cap > cap:
            raise ValueError("ram_spill_cap exceeds 2x free VRAM")


@dataclass
class PromptTier:
    tier: str
    tool_doc_budget: int
    soul_budget: int


def effective_context(budget: ContextBudget) -> int:
    """Tokens the invocation may use; 0 means no context fits."""
    usable_mb = budget.vram_free * VRAM_SAFETY_FACTOR - budget.overhead
    if usable_mb <= 0:
        ctx_mem = 0
    else:
        ctx_mem = math.floor(usable_mb / budget.c_kv) * 1000
    bounds = [budget.ctx_native, ctx_mem]
    if budget.ctx_user is not None:
        bounds.append(budget.ctx_user)
    return max(0, min(bounds))


def kv_cost_class(params_b: float) -> float:
    """KV-cache MB per 1K tokens, stepped by parameter count."""
    if params_b <= 0:
        raise ValueError("params_b must be positive")
    if params_b <= 3:
        return 0.08
    if params_b <= 10:
        return 0.25
    if params_b <= 30:
        return 0.60
    return 1.2


def tier_for(params_b: float) -> PromptTier:
    if params_b <= 0:
        raise ValueError("params_b must be positive")
    if params_b <= 10:
        name = "small"
    elif params_b <= 25:
        name = "medium"
    else:
        name = "large"
    tool_docs, soul = TIER_BUDGETS[name]
    return PromptTier(tier=name, tool_doc_budget=tool_docs, soul_budget=soul)


def soul_sections_for(role: str) -> list[str]:
    try:
        return list(SOUL_SECTIONS[role])
    except KeyError:
        raise ModelHubError("unknown_role", f"no SOUL mapping for {role!r}")


def thinking_mode_for(task_class: str, profile: ModelProfile) -> str:
    """off | on | default; non-thinking models always get default."""
    if "thinking" not in profile.capabilities:
        return "default"
    return {"simple": "off", "complex": "on"}.get(task_class, "default")


def estimate_tokens(text: str) -> int:
    """Documented model-free estimator: ceil(characters / 4)."""
    return math.ceil(len(text) / 4)


# ---------------------------------------------------------------------------
# SOUL document parsing and tiered assets
# ---------------------------------------------------------------------------

_SOUL_HEADER_RE = re.compile(r"^##\s+(.+?)\s*$", re.MULTILINE)


def parse_soul_sections(text: str) -> dict[str, str]:
    """Split a '## Section' markdown document into name -> body text."""
    sections: dict[str, str] = {}
    matches = list(_SOUL_HEADER_RE.finditer(text))
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections[m.group(1)] = text[m.end():end].strip()
    return sections


def compose_soul(sections: dict[str, str], names: list[str]) -> str:
    parts = []
    for name in names:
        if name in sections:
            parts.append(f"## {name}\n{sections[name]}")
    return "\n\n".join(parts)


def load_soul_asset() -> str:
    return (resources.files("triphase") / "assets" / "soul.md").read_text()


def load_tier_tooldoc(tier: str) -> str:
    return (resources.files("triphase") / "assets"
            / f"tooldocs_{tier}.md").read_text()


def soul_for_role(role: str, soul_text: str | None = None) -> str:
    text = soul_text if soul_text is not None else load_soul_asset()
    return compose_soul(parse_soul_sections(text), soul_sections_for(role))


def soul_for_tier(tier: str, soul_text: str | None = None) -> str:
    text = soul_text if soul_text is not None else load_soul_asset()
    return compose_soul(parse_soul_sections(text), TIER_SOUL_SECTIONS[tier])


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

class ModelCatalog:
    def __init__(self, profiles: list[ModelProfile] | None = None) -> None:
        if profiles is None:
            raw = json.loads((resources.files("triphase") / "assets"
                              / "catalog.json").read_text())
            profiles = [ModelProfile(
                name=p["name"], params_b=p["params_b"],
                family=p.get("family", ""),
                capabilities=tuple(p.get("capabilities", ("completion",))),
                native_ctx=p.get("native_ctx", 8192),
                vram_by_quant=dict(p.get("vram_by_quant", {})),
            ) for p in raw["profiles"]]
        self._profiles = {p.name: p for p in profiles}

    def __len__(self) -> int:
        return len(self._profiles)

    def names(self) -> list[str]:
        return sorted(self._profiles)

    def get(self, name: str) -> ModelProfile | None:
        return self._profiles.get(name)

    def require(self, name: str) -> ModelProfile:
        profile = self.get(name)
        if profile is None:
            raise ModelHubError("unknown_model", f"{name} not in catalog")
        return profile


def detect_capabilities(provider, model_name: str,
                        catalog: ModelCatalog | None = None) -> set[str]:
    """Query the backend's model-info route; fall back to the catalog."""
    info = None
    if provider is not None:
        try:
            info = provider.model_info(model_name)
        except Exception:
            info = None
    if info and info.get("capabilities"):
        return set(info["capabilities"])
    if catalog is not None:
        profile = catalog.get(model_name)
        if profile is not None:
            return set(profile.capabilities)
    raise ModelHubError("unknown_model",
                        f"no capability source for {model_name}")


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------

@dataclass
class ModelSession:
    profile: ModelProfile
    provider: object
    role: str
    quant: str = "q4"
    state: str = "unloaded"
    effective_ctx: int = 0

    def generate(self, prompt: str, think: str = "default",
                 context: list[dict] | None = None) -> str:
        messages = list(context or ())
        messages.append({"role": "user", "content": prompt})
        return self.provider.chat(self.profile.name, messages, think=think)


class SessionRegistry:
    """Serialized acquire/release state machine under a VRAM capacity."""

    def __init__(self, capacity_mb: float,
                 runtime_reserve_mb: float = DEFAULT_RUNTIME_RESERVE_MB) -> None:
        self.capacity_mb = capacity_mb
        self.runtime_reserve_mb = runtime_reserve_mb
        self._lock = threading.RLock()
        self._resident: dict[int, ModelSession] = {}

    def resident_mb(self) -> float:
        with self._lock:
            return sum(s.profile.vram_mb(s.quant)
                       for s in self._resident.values())

    def resident_sessions(self) -> list[ModelSession]:
        with self._lock:
            return list(self._resident.values())

    def budget_for(self, profile: ModelProfile, vram_free: float,
                   ctx_user: int | None = None,
                   quant: str = "q4") -> ContextBudget:
        """Budget for loading *profile* into *vram_free* MB: the overhead
        term is its resident weights plus the fixed runtime reserve."""
        overhead = profile.vram_mb(quant) + self.runtime_reserve_mb
        return ContextBudget(
            ctx_native=profile.native_ctx, vram_free=vram_free,
            overhead=overhead, c_kv=kv_cost_class(profile.params_b),
            ctx_user=ctx_user)

    def acquire(self, role: str, profile: ModelProfile, provider,
                quant: str = "q4", ctx_user: int | None = None) -> ModelSession:
        if role not in ALL_ROLES:
            raise ModelHubError("unknown_role", f"bad role {role!r}")
        with self._lock:
            needed = profile.vram_mb(quant)
            projected = self.resident_mb() + needed
            if projected > self.capacity_mb:
                raise ModelHubError(
                    "insufficient_vram",
                    f"loading {profile.name} needs {needed:.0f} MB; "
                    f"projected {projected:.0f} MB exceeds capacity "
                    f"{self.capacity_mb:.0f} MB")
            try:
                provider.load(profile.name)
            except Exception as exc:
                raise ModelHubError("provider_error", str(exc))
            session = ModelSession(profile=profile, provider=provider,
                                   role=role, quant=quant, state="loaded")
            free_before_load = self.capacity_mb - self.resident_mb()
            budget = self.budget_for(profile, vram_free=free_before_load,
                                     ctx_user=ctx_user, quant=quant)
            session.effective_ctx = effective_context(budget)
            self._resident[id(session)] = session
            return session

    def release(self, session: ModelSession) -> None:
        """Idempotent unload."""
        with self._lock:
            if id(session) not in self._resident:
                return
            del self._resident[id(session)]
            session.state = "unloaded"
            try:
                session.provider.unload(session.profile.name)
            except Exception:
                pass
