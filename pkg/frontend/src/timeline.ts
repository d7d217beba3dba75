// Timeline store: orders envelopes by seq, dedups on reconnect, and
// tracks per-item UI state (collapsed thinking blocks, tool badges).

import type { EventEnvelope, EventKind, ToolStatus } from "./types.js";

export interface TimelineItem {
    seq: number;
    kind: EventKind;
    payload: Record<string, unknown>;
    at: number;
    collapsed: boolean;           // thinking items start collapsed
    status?: ToolStatus;          // tool items only
    pairedSeq?: number;           // resolution events point at their prompt
}

export class TimelineStore {
    private items = new Map<number, TimelineItem>();
    private openTools: number[] = [];
    private openInterventions: number[] = [];

    apply(env: EventEnvelope): TimelineItem | null {
        if (this.items.has(env.seq)) {
            return null; // duplicate delivery (reconnect replay)
        }
        const item: TimelineItem = {
            seq: env.seq,
            kind: env.kind,
            payload: env.payload,
            at: env.at,
            collapsed: env.kind === "thinking",
        };
        if (env.kind === "tool_started") {
            item.status = "pending";
            this.openTools.push(env.seq);
        } else if (env.kind === "tool_finished") {
            const started = this.openTools.shift();
            if (started !== undefined) {
                const opened = this.items.get(started);
                // A badge flips pending -> done/failed exactly once.
                if (opened && opened.status === "pending") {
                    opened.status = env.payload["ok"] ? "done" : "failed";
                }
                item.pairedSeq = started;
            }
            item.status = env.payload["ok"] ? "done" : "failed";
        } else if (env.kind === "intervention_needed") {
            this.openInterventions.push(env.seq);
        } else if (env.kind === "intervention_resolved") {
            item.pairedSeq = this.openInterventions.shift();
        }
        this.items.set(env.seq, item);
        return item;
    }

    toggle(seq: number): void {
        const item = this.items.get(seq);
        if (item && item.kind === "thinking") {
            item.collapsed = !item.collapsed;
        }
    }

    ordered(): TimelineItem[] {
        return [...this.items.values()].sort((a, b) => a.seq - b.seq);
    }

    get(seq: number): TimelineItem | undefined {
        return this.items.get(seq);
    }

    lastSeq(): number {
        let last = -1;
        for (const seq of this.items.keys()) {
            if (seq > last) last = seq;
        }
        return last;
    }

    isTerminal(): boolean {
        return this.ordered().some(
            (i) => i.kind === "conclusion" || i.kind === "error",
        );
    }
}
