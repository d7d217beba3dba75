// Rating control attached to the conclusion item: 1-10, posts once.

import { GatewayClient, GatewayError } from "./gateway.js";

export interface RatingResult {
    ok: boolean;
    skillLearned?: string | null;
    error?: string;
}

export async function submitRating(
    gateway: GatewayClient,
    runId: string,
    rating: number,
): Promise<RatingResult> {
    if (!Number.isInteger(rating) || rating < 1 || rating > 10) {
        return { ok: false, error: "rating must be an integer 1-10" };
    }
    try {
        const reply = await gateway.rate(runId, rating);
        return { ok: true, skillLearned: (reply["skill_learned"] as string) ?? null };
    } catch (err) {
        if (err instanceof GatewayError) {
            return { ok: false, error: `${err.kind}: ${err.message}` };
        }
        return { ok: false, error: String(err) };
    }
}
