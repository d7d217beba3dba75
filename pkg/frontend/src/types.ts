// Wire types shared with the gateway's documented REST + SSE surface.

export const EVENT_KINDS = [
    "phase_transition",
    "thinking",
    "plan_ready",
    "review_feedback",
    "quality_scored",
    "model_selected",
    "model_switch",
    "tool_started",
    "tool_finished",
    "permission_prompt",
    "permission_resolved",
    "intervention_needed",
    "intervention_resolved",
    "conclusion",
    "memory_stored",
    "skill_learned",
    "error",
] as const;

export type EventKind = (typeof EVENT_KINDS)[number];

export interface EventEnvelope {
    run_id: string;
    seq: number;
    kind: EventKind;
    payload: Record<string, unknown>;
    at: number;
}

export interface RunHandle {
    run_id: string;
    state: string;
    session: string;
    created_at: number;
    deadline: number | null;
}

export interface ModelStateSnapshot {
    catalog: string[];
    resident: { model: string; role: string; effective_ctx: number }[];
    capacity_mb: number;
}

export type ToolStatus = "pending" | "done" | "failed";
