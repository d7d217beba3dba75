// Thin REST client over the gateway's documented surface.

import type { ModelStateSnapshot, RunHandle } from "./types.js";

export interface GatewayErrorBody {
    kind: string;
    message: string;
}

export class GatewayClient {
    constructor(
        public baseUrl: string,
        private fetchFn: typeof fetch = fetch,
    ) {}

    private async post(path: string, body: unknown): Promise<Response> {
        return this.fetchFn(`${this.baseUrl}${path}`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
    }

    async submit(
        request: string,
        overrides: Record<string, string> = {},
        session = "default",
    ): Promise<RunHandle> {
        const resp = await this.post("/runs", { request, overrides, session });
        if (!resp.ok) {
            throw await toError(resp);
        }
        return (await resp.json()) as RunHandle;
    }

    async resolvePermission(
        runId: string,
        promptId: string,
        decision: "allow" | "deny",
    ): Promise<{ status: string }> {
        const resp = await this.post(`/runs/${runId}/permission`, {
            prompt_id: promptId,
            decision,
        });
        if (!resp.ok) throw await toError(resp);
        return (await resp.json()) as { status: string };
    }

    async sendIntervention(
        runId: string,
        guidance: string,
    ): Promise<{ status: string }> {
        const resp = await this.post(`/runs/${runId}/intervention`, { guidance });
        if (!resp.ok) throw await toError(resp);
        return (await resp.json()) as { status: string };
    }

    async rate(runId: string, rating: number): Promise<Record<string, unknown>> {
        const resp = await this.post(`/runs/${runId}/rating`, { rating });
        if (!resp.ok) throw await toError(resp);
        return (await resp.json()) as Record<string, unknown>;
    }

    async models(): Promise<ModelStateSnapshot> {
        const resp = await this.fetchFn(`${this.baseUrl}/state/models`);
        if (!resp.ok) throw await toError(resp);
        return (await resp.json()) as ModelStateSnapshot;
    }

    async state(selector: string): Promise<Record<string, unknown>> {
        const resp = await this.fetchFn(`${this.baseUrl}/state/${selector}`);
        if (!resp.ok) throw await toError(resp);
        return (await resp.json()) as Record<string, unknown>;
    }
}

export class GatewayError extends Error {
    constructor(
        public kind: string,
        message: string,
        public status: number,
    ) {
        super(message);
    }
}

async function toError(resp: Response): Promise<GatewayError> {
    try {
        const body = (await resp.json()) as { detail?: GatewayErrorBody };
        const detail = body.detail;
        return new GatewayError(
            detail?.kind ?? "http_error",
            detail?.message ?? `HTTP ${resp.status}`,
            resp.status,
        );
    } catch {
        return new GatewayError("http_error", `HTTP ${resp.status}`, resp.status);
    }
}
