// Permission prompt widget state: a 60-second countdown driven by an
// injectable clock; the widget disables itself at the deadline and any
// later click surfaces the gateway's stale notice.

import type { GatewayClient } from "./gateway.js";

export type PromptPhase = "counting" | "decided" | "auto_denied" | "stale";

export class PromptWidget {
    phase: PromptPhase = "counting";
    decision: "allow" | "deny" | null = null;
    notice = "";

    constructor(
        public promptId: string,
        public runId: string,
        public category: string,
        public summary: string,
        private openedAt: number,
        private windowSeconds = 60,
        private clock: () => number = () => Date.now() / 1000,
    ) {}

    remainingSeconds(): number {
        const left = this.windowSeconds - (this.clock() - this.openedAt);
        return Math.max(0, Math.ceil(left));
    }

    tick(): void {
        if (this.phase === "counting" && this.remainingSeconds() <= 0) {
            this.phase = "auto_denied";
            this.notice = "auto-denied";
        }
    }

    get disabled(): boolean {
        return this.phase !== "counting";
    }

    label(): string {
        if (this.phase === "counting") {
            return `allow ${this.category}? (${this.remainingSeconds()}s)`;
        }
        if (this.phase === "auto_denied") return "auto-denied";
        if (this.phase === "stale") return `stale: ${this.notice}`;
        return `resolved: ${this.decision}`;
    }

    async answer(
        gateway: GatewayClient,
        decision: "allow" | "deny",
    ): Promise<PromptPhase> {
        this.tick();
        if (this.phase === "auto_denied") {
            // Post-deadline clicks never reach the gateway.
            return this.phase;
        }
        const reply = await gateway.resolvePermission(
            this.runId,
            this.promptId,
            decision,
        );
        if (reply.status === "stale") {
            this.phase = "stale";
            this.notice = "decision arrived after the deadline";
        } else {
            this.phase = "decided";
            this.decision = decision;
        }
        return this.phase;
    }
}
