// Model role selection: catalog-backed dropdowns whose choices become
// submit-time overrides. The vision selector is present but marked
// unavailable (vision execution is not part of this build).

import type { GatewayClient } from "./gateway.js";

export const SELECTABLE_ROLES = ["planner", "reviewer", "tools"] as const;
export const UNAVAILABLE_ROLES = ["vision"] as const;

export interface RoleOption {
    role: string;
    available: boolean;
    choices: string[];
    selected: string | null;
}

export class ModelSelection {
    options: RoleOption[] = [];

    async load(gateway: GatewayClient): Promise<void> {
        const snapshot = await gateway.models();
        this.options = [
            ...SELECTABLE_ROLES.map((role) => ({
                role,
                available: true,
                choices: snapshot.catalog,
                selected: null as string | null,
            })),
            ...UNAVAILABLE_ROLES.map((role) => ({
                role,
                available: false,
                choices: [],
                selected: null as string | null,
            })),
        ];
    }

    select(role: string, model: string | null): void {
        const option = this.options.find((o) => o.role === role);
        if (!option || !option.available) {
            return;
        }
        option.selected = model;
    }

    buildOverrides(): Record<string, string> {
        const overrides: Record<string, string> = {};
        for (const option of this.options) {
            if (option.available && option.selected) {
                overrides[option.role] = option.selected;
            }
        }
        return overrides;
    }
}
