// Intervention input: client-side validation plus inline error state.

import { GatewayClient, GatewayError } from "./gateway.js";

export interface InterventionResult {
    ok: boolean;
    error?: string;
}

export function validateGuidance(text: string): string | null {
    if (!text.trim()) {
        return "guidance must be non-empty";
    }
    return null;
}

export async function sendIntervention(
    gateway: GatewayClient,
    runId: string,
    guidance: string,
): Promise<InterventionResult> {
    const problem = validateGuidance(guidance);
    if (problem) {
        return { ok: false, error: problem };
    }
    try {
        await gateway.sendIntervention(runId, guidance.trim());
        return { ok: true };
    } catch (err) {
        if (err instanceof GatewayError) {
            return { ok: false, error: `${err.kind}: ${err.message}` };
        }
        return { ok: false, error: String(err) };
    }
}
