import { describe, expect, it } from "vitest";

import { renderItem, renderTimeline } from "../src/render.js";
import { TimelineStore } from "../src/timeline.js";
import { EVENT_KINDS, type EventEnvelope, type EventKind } from "../src/types.js";

function env(seq: number, kind: EventKind, payload: Record<string, unknown> = {}): EventEnvelope {
    return { run_id: "r1", seq, kind, payload, at: 1000 + seq };
}

const SAMPLE_PAYLOADS: Record<EventKind, Record<string, unknown>> = {
    phase_transition: { phase: "discussion" },
    thinking: { role: "planner", text: "let me think" },
    plan_ready: { round: 1, text: "1. do the thing", tool_calls: 1 },
    review_feedback: { round: 1, issues: "none", suggestions: "none" },
    quality_scored: { round: 1, raw: 0.85, adjusted: 0.85, guards: [] },
    model_selected: { roles: { planner: "m1" } },
    model_switch: { reason: "plan exceeds simple-plan size", loading: "m2" },
    tool_started: { instruction: "list /tmp", canonical: "file_ops", raw_type: "file_ops", corrections: [] },
    tool_finished: { instruction: "list /tmp", ok: true, summary: "2 entries", strategy: "local_fs", error_kind: null },
    permission_prompt: { prompt_id: "p1", category: "cli", summary: "cli: rm x", deadline: 1060 },
    permission_resolved: { prompt_id: "p1", decision: "allow" },
    intervention_needed: { prompt: "which account?" },
    intervention_resolved: { prompt: "which account?", guidance: "blue" },
    conclusion: { text: "done", source: "executor", language: "en" },
    memory_stored: { session_entry: "abc", pipeline_entry: "def" },
    skill_learned: { name: "organize-photos", tags: ["photos"], origin: "learned" },
    error: { error_kind: "discussion_exhausted", detail: "no plan passed" },
};

describe("timeline rendering", () => {
    it("renders all 17 event kinds with distinct treatments", () => {
        const store = new TimelineStore();
        EVENT_KINDS.forEach((kind, i) => {
            store.apply(env(i, kind, SAMPLE_PAYLOADS[kind]));
        });
        const items = store.ordered();
        expect(items).toHaveLength(17);

        const rendered = items.map((item) => renderItem(item));
        // Distinct kind-specific class on each.
        const classes = rendered.map((html) => /event-[a-z_]+/.exec(html)?.[0]);
        expect(new Set(classes).size).toBe(17);
        // Distinct glyphs across kinds.
        const glyphs = rendered.map((html) => /<span class="glyph">(.+?)<\/span>/.exec(html)?.[1]);
        expect(new Set(glyphs).size).toBe(17);
        // Whole-timeline snapshot pins the treatment of every kind.
        expect(renderTimeline(items)).toMatchSnapshot();
    });

    it("collapses thinking by default and expands on toggle", () => {
        const store = new TimelineStore();
        store.apply(env(0, "thinking", SAMPLE_PAYLOADS.thinking));
        const item = store.ordered()[0];
        expect(item.collapsed).toBe(true);
        expect(renderItem(item)).toContain("click to expand");
        store.toggle(0);
        expect(store.ordered()[0].collapsed).toBe(false);
        expect(renderItem(store.ordered()[0])).toContain("let me think");
    });

    it("tool badges transition pending -> done exactly once", () => {
        const store = new TimelineStore();
        store.apply(env(0, "tool_started", SAMPLE_PAYLOADS.tool_started));
        expect(store.get(0)?.status).toBe("pending");
        store.apply(env(1, "tool_finished", SAMPLE_PAYLOADS.tool_finished));
        expect(store.get(0)?.status).toBe("done");
        expect(store.get(1)?.pairedSeq).toBe(0);
        // Replaying the finish (reconnect duplicate) changes nothing.
        store.apply(env(1, "tool_finished", { ...SAMPLE_PAYLOADS.tool_finished, ok: false }));
        expect(store.get(0)?.status).toBe("done");
    });

    it("failed tools flip to failed", () => {
        const store = new TimelineStore();
        store.apply(env(0, "tool_started", SAMPLE_PAYLOADS.tool_started));
        store.apply(env(1, "tool_finished", { ...SAMPLE_PAYLOADS.tool_finished, ok: false }));
        expect(store.get(0)?.status).toBe("failed");
    });

    it("keeps seq order under shuffled and duplicated delivery", () => {
        const events: EventEnvelope[] = [];
        for (let i = 0; i < 40; i++) {
            const kind = EVENT_KINDS[i % EVENT_KINDS.length];
            events.push(env(i, kind, SAMPLE_PAYLOADS[kind]));
        }
        // Deterministic fuzz: interleave replays from random split points.
        let seed = 1234;
        const rand = () => {
            seed = (seed * 1103515245 + 12345) % 2 ** 31;
            return seed / 2 ** 31;
        };
        const delivery: EventEnvelope[] = [];
        let cursor = 0;
        while (cursor < events.length) {
            const rewind = Math.floor(rand() * 5);
            const start = Math.max(0, cursor - rewind);
            const end = Math.min(events.length, cursor + 1 + Math.floor(rand() * 6));
            for (let i = start; i < end; i++) delivery.push(events[i]);
            cursor = end;
        }
        const store = new TimelineStore();
        for (const e of delivery) store.apply(e);
        const seqs = store.ordered().map((i) => i.seq);
        expect(seqs).toEqual(events.map((e) => e.seq));
    });

    it("pairs interventions with their resolutions", () => {
        const store = new TimelineStore();
        store.apply(env(0, "intervention_needed", SAMPLE_PAYLOADS.intervention_needed));
        store.apply(env(1, "intervention_resolved", SAMPLE_PAYLOADS.intervention_resolved));
        expect(store.get(1)?.pairedSeq).toBe(0);
    });

    it("reports terminal state", () => {
        const store = new TimelineStore();
        store.apply(env(0, "phase_transition", { phase: "discussion" }));
        expect(store.isTerminal()).toBe(false);
        store.apply(env(1, "conclusion", SAMPLE_PAYLOADS.conclusion));
        expect(store.isTerminal()).toBe(true);
    });
});
