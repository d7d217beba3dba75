// SSE event stream client with seq-based resume.
//
// Uses fetch streaming rather than EventSource so the transport is
// injectable in tests; on connection loss it reports a reconnect
// banner and resumes from the last applied sequence number.

import type { EventEnvelope } from "./types.js";

export interface SseFrame {
    id?: number;
    event?: string;
    data?: string;
}

export function parseSseChunk(buffer: string): { frames: SseFrame[]; rest: string } {
    const frames: SseFrame[] = [];
    const parts = buffer.split("\n\n");
    const rest = parts.pop() ?? "";
    for (const block of parts) {
        const frame: SseFrame = {};
        for (const line of block.split("\n")) {
            if (line.startsWith("id: ")) frame.id = Number(line.slice(4));
            else if (line.startsWith("event: ")) frame.event = line.slice(7);
            else if (line.startsWith("data: ")) frame.data = line.slice(6);
        }
        if (frame.data !== undefined) frames.push(frame);
    }
    return { frames, rest };
}

export interface StreamCallbacks {
    onEvent: (env: EventEnvelope) => void;
    onReconnect?: (attempt: number) => void;
    onClose?: () => void;
}

export class EventStreamClient {
    lastSeq = -1;
    reconnectBannerVisible = false;
    private stopped = false;

    constructor(
        private baseUrl: string,
        private fetchFn: typeof fetch = fetch,
        private retryDelayMs = 250,
        private maxReconnects = 20,
    ) {}

    stop(): void {
        this.stopped = true;
    }

    async run(runId: string, callbacks: StreamCallbacks, fromSeq = 0): Promise<void> {
        this.lastSeq = fromSeq - 1;
        let attempt = 0;
        while (!this.stopped) {
            try {
                const finished = await this.readOnce(runId, callbacks);
                this.reconnectBannerVisible = false;
                if (finished) {
                    callbacks.onClose?.();
                    return;
                }
            } catch {
                // fall through to reconnect
            }
            attempt += 1;
            if (attempt > this.maxReconnects) {
                callbacks.onClose?.();
                return;
            }
            this.reconnectBannerVisible = true;
            callbacks.onReconnect?.(attempt);
            await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs));
        }
    }

    private async readOnce(runId: string, callbacks: StreamCallbacks): Promise<boolean> {
        const url = `${this.baseUrl}/runs/${runId}/events?from_seq=${this.lastSeq + 1}`;
        const resp = await this.fetchFn(url);
        if (!resp.ok || !resp.body) {
            throw new Error(`stream failed: ${resp.status}`);
        }
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        let sawTerminal = false;
        for (;;) {
            const { done, value } = await reader.read();
            if (value) {
                buffer += decoder.decode(value, { stream: true });
                const { frames, rest } = parseSseChunk(buffer);
                buffer = rest;
                for (const frame of frames) {
                    if (!frame.data) continue;
                    const env = JSON.parse(frame.data) as EventEnvelope;
                    if (env.seq <= this.lastSeq) continue; // duplicate
                    this.lastSeq = env.seq;
                    callbacks.onEvent(env);
                    if (env.kind === "conclusion" || env.kind === "error") {
                        sawTerminal = true;
                    }
                }
            }
            if (done) break;
        }
        return sawTerminal;
    }
}
