// Pure HTML rendering for timeline items: every event kind gets a
// distinct visual treatment (class + glyph + kind-specific body), so a
// snapshot over all kinds proves coverage.

import type { TimelineItem } from "./timeline.js";

const GLYPHS: Record<string, string> = {
    phase_transition: "⇉",   // ⇉
    thinking: "…",           // …
    plan_ready: "✎",         // ✎
    review_feedback: "⚐",    // ⚐
    quality_scored: "★",     // ★
    model_selected: "⚙",     // ⚙
    model_switch: "⇄",       // ⇄
    tool_started: "▶",       // ▶
    tool_finished: "■",      // ■
    permission_prompt: "⚠",  // ⚠
    permission_resolved: "✓",// ✓
    intervention_needed: "✋",// ✋
    intervention_resolved: "↩", // ↩
    conclusion: "⚑",         // ⚑
    memory_stored: "◉",      // ◉
    skill_learned: "⭐",      // ⭐
    error: "✖",              // ✖
};

function esc(text: unknown): string {
    return String(text ?? "")
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;");
}

function body(item: TimelineItem): string {
    const p = item.payload;
    switch (item.kind) {
        case "phase_transition":
            return `phase: ${esc(p["phase"])}`;
        case "thinking": {
            const text = esc(p["text"]);
            return item.collapsed
                ? `<span class="thinking-label">${esc(p["role"])} reasoning (click to expand)</span>`
                : `<pre class="thinking-body">${text}</pre>`;
        }
        case "plan_ready":
            return `round ${esc(p["round"])}: <pre>${esc(p["text"])}</pre>`;
        case "review_feedback":
            return `issues: ${esc(p["issues"])}<br>suggestions: ${esc(p["suggestions"])}`;
        case "quality_scored":
            return `<span class="score-chip">score ${esc(p["adjusted"])}</span> (raw ${esc(p["raw"])})`;
        case "model_selected":
            return `roles: ${esc(JSON.stringify(p["roles"]))}`;
        case "model_switch":
            return `switch: ${esc(p["reason"])} → ${esc(p["loading"] ?? "")}`;
        case "tool_started":
            return `<span class="badge badge-pending">pending</span> ${esc(p["canonical"])}: ${esc(p["instruction"])}`;
        case "tool_finished": {
            const cls = p["ok"] ? "badge-done" : "badge-failed";
            const label = p["ok"] ? "done" : "failed";
            return `<span class="badge ${cls}">${label}</span> ${esc(p["summary"])}`;
        }
        case "permission_prompt":
            return `allow ${esc(p["category"])}? ${esc(p["summary"])}`;
        case "permission_resolved":
            return `decision: ${esc(p["decision"])}`;
        case "intervention_needed":
            return `needs guidance: ${esc(p["prompt"])}`;
        case "intervention_resolved":
            return `guidance: ${esc(p["guidance"])}`;
        case "conclusion":
            return `<div class="conclusion">${esc(p["text"])}</div>`;
        case "memory_stored":
            return `session entry ${esc(p["session_entry"])}`;
        case "skill_learned":
            return `learned skill: ${esc(p["name"])}`;
        case "error":
            return `${esc(p["error_kind"])}: ${esc(p["detail"])}`;
        default:
            return esc(JSON.stringify(p));
    }
}

export function renderItem(item: TimelineItem): string {
    const glyph = GLYPHS[item.kind] ?? "?";
    const status = item.status ? ` data-status="${item.status}"` : "";
    return (
        `<div class="event event-${item.kind}" data-seq="${item.seq}"${status}>` +
        `<span class="glyph">${glyph}</span>` +
        `<span class="kind">${item.kind}</span>` +
        `<span class="body">${body(item)}</span>` +
        `</div>`
    );
}

export function renderTimeline(items: TimelineItem[]): string {
    return items.map(renderItem).join("\n");
}
