// Browser entry point: wires the stores and widgets onto the page.

import { GatewayClient } from "./gateway.js";
import { sendIntervention, validateGuidance } from "./intervention.js";
import { ModelSelection, UNAVAILABLE_ROLES } from "./models.js";
import { PromptWidget } from "./permission.js";
import { submitRating } from "./rating.js";
import { renderTimeline } from "./render.js";
import { EventStreamClient } from "./stream.js";
import { TimelineStore } from "./timeline.js";
import { THEMES, applyTheme } from "./themes.js";
import type { EventEnvelope } from "./types.js";

const gateway = new GatewayClient(location.origin.replace(/\/$/, ""));

const timelineEl = document.getElementById("timeline") as HTMLElement;
const bannerEl = document.getElementById("banner") as HTMLElement;
const promptEl = document.getElementById("prompt") as HTMLElement;
const interventionForm = document.getElementById("intervention") as HTMLFormElement;
const interventionInput = document.getElementById("guidance") as HTMLInputElement;
const interventionError = document.getElementById("guidance-error") as HTMLElement;
const requestForm = document.getElementById("request-form") as HTMLFormElement;
const requestInput = document.getElementById("request") as HTMLInputElement;
const modelPanel = document.getElementById("models") as HTMLElement;
const ratingEl = document.getElementById("rating") as HTMLElement;
const themeButton = document.getElementById("theme-toggle") as HTMLButtonElement;

const timeline = new TimelineStore();
const selection = new ModelSelection();
let currentRun: string | null = null;
let activePrompt: PromptWidget | null = null;
let themeIndex = 0;

applyTheme(document.documentElement, THEMES[themeIndex]);
themeButton.addEventListener("click", () => {
    themeIndex = (themeIndex + 1) % THEMES.length;
    applyTheme(document.documentElement, THEMES[themeIndex]);
});

function redraw(): void {
    timelineEl.innerHTML = renderTimeline(timeline.ordered());
    for (const el of timelineEl.querySelectorAll(".event-thinking")) {
        el.addEventListener("click", () => {
            timeline.toggle(Number((el as HTMLElement).dataset.seq));
            redraw();
        });
    }
}

function drawPrompt(): void {
    if (!activePrompt) {
        promptEl.innerHTML = "";
        return;
    }
    const widget = activePrompt;
    widget.tick();
    promptEl.innerHTML =
        `<span class="prompt-label">${widget.label()}</span>` +
        `<button id="allow" ${widget.disabled ? "disabled" : ""}>allow</button>` +
        `<button id="deny" ${widget.disabled ? "disabled" : ""}>deny</button>`;
    document.getElementById("allow")?.addEventListener("click", () => {
        void widget.answer(gateway, "allow").then(drawPrompt);
    });
    document.getElementById("deny")?.addEventListener("click", () => {
        void widget.answer(gateway, "deny").then(drawPrompt);
    });
}

setInterval(drawPrompt, 1000);

function onEvent(env: EventEnvelope): void {
    timeline.apply(env);
    if (env.kind === "permission_prompt") {
        activePrompt = new PromptWidget(
            String(env.payload["prompt_id"]),
            env.run_id,
            String(env.payload["category"]),
            String(env.payload["summary"]),
            env.at,
        );
        drawPrompt();
    }
    if (env.kind === "permission_resolved") {
        activePrompt = null;
        drawPrompt();
    }
    if (env.kind === "conclusion") {
        ratingEl.innerHTML =
            "rate this run: " +
            Array.from({ length: 10 }, (_, i) =>
                `<button class="rate" data-value="${i + 1}">${i + 1}</button>`,
            ).join("");
        for (const el of ratingEl.querySelectorAll(".rate")) {
            el.addEventListener("click", () => {
                const value = Number((el as HTMLElement).dataset.value);
                if (currentRun) {
                    void submitRating(gateway, currentRun, value).then((res) => {
                        ratingEl.textContent = res.ok
                            ? `rated ${value}` +
                              (res.skillLearned ? `, learned ${res.skillLearned}` : "")
                            : `rating failed: ${res.error}`;
                    });
                }
            });
        }
    }
    redraw();
}

requestForm.addEventListener("submit", (event) => {
    event.preventDefault();
    void (async () => {
        const handle = await gateway.submit(
            requestInput.value,
            selection.buildOverrides(),
        );
        currentRun = handle.run_id;
        const client = new EventStreamClient(gateway.baseUrl);
        void client.run(handle.run_id, {
            onEvent,
            onReconnect: () => {
                bannerEl.textContent = "connection lost, reconnecting...";
                bannerEl.hidden = false;
            },
            onClose: () => {
                bannerEl.hidden = true;
            },
        });
    })();
});

interventionForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const problem = validateGuidance(interventionInput.value);
    if (problem) {
        interventionError.textContent = problem;
        return;
    }
    if (!currentRun) return;
    void sendIntervention(gateway, currentRun, interventionInput.value).then(
        (result) => {
            interventionError.textContent = result.ok ? "" : result.error ?? "";
            if (result.ok) interventionInput.value = "";
        },
    );
});

void (async () => {
    await selection.load(gateway);
    modelPanel.innerHTML = selection.options
        .map((option) => {
            if (!option.available) {
                return (
                    `<label class="role role-unavailable">${option.role}` +
                    `<select disabled><option>unavailable</option></select></label>`
                );
            }
            const choices = ["<option value=''>engine default</option>"]
                .concat(option.choices.map((c) => `<option>${c}</option>`))
                .join("");
            return `<label class="role">${option.role}<select data-role="${option.role}">${choices}</select></label>`;
        })
        .join("");
    for (const el of modelPanel.querySelectorAll("select[data-role]")) {
        el.addEventListener("change", () => {
            const select = el as HTMLSelectElement;
            selection.select(select.dataset.role ?? "", select.value || null);
        });
    }
    void UNAVAILABLE_ROLES;
})();
