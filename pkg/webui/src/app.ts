// Dashboard wiring: load state, render, submit measurements, surface errors.

import { ApiClient, ApiError } from "./api.js";
import type { CampaignViewModel, WhatifKey } from "./viewmodel.js";
import { buildViewModel, sortWhatifRows, whatifRows } from "./viewmodel.js";
import {
    el,
    renderBeliefChart,
    renderEntropyTrace,
    renderHistory,
    renderRecommendationCard,
    renderWeightBars,
    renderWhatifTable,
} from "./render.js";

export class App {
    private vm: CampaignViewModel | null = null;
    private sortKey: WhatifKey = "xIndex";
    private sortDescending = false;
    private notice: { kind: string; text: string } | null = null;
    private formX = "";
    private formY = "";

    constructor(
        private readonly root: HTMLElement,
        private readonly api: ApiClient,
        readonly campaignId: string,
    ) {}

    async load(): Promise<void> {
        try {
            const state = await this.api.getState(this.campaignId);
            let recommendation = null;
            try {
                recommendation = await this.api.getRecommendation(this.campaignId);
            } catch {
                recommendation = null; // state still renders without a recommendation
            }
            this.vm = buildViewModel(state, recommendation);
        } catch (err) {
            if (err instanceof ApiError && err.status === 404) {
                this.renderNotFound();
                return;
            }
            this.renderRetryBanner(err);
            return;
        }
        this.render();
    }

    async submit(): Promise<void> {
        if (!this.vm) {
            return;
        }
        const x = Number(this.formX);
        const y = Number(this.formY);
        if (!Number.isInteger(x) || x < 0 || x >= this.vm.alternatives.length) {
            this.notice = { kind: "form-error", text: "x must be a valid alternative index" };
            this.render();
            return;
        }
        if (this.formY.trim() === "" || !Number.isFinite(y)) {
            this.notice = { kind: "form-error", text: "y must be a finite number" };
            this.render();
            return;
        }
        try {
            const result = await this.api.recordMeasurement(this.campaignId, x, y, this.vm.step);
            this.notice = result.resampled
                ? { kind: "resample-notice", text: `step ${result.step}: candidate set was resampled` }
                : { kind: "recorded", text: `step ${result.step} recorded` };
            this.formY = "";
        } catch (err) {
            if (err instanceof ApiError && err.status === 422) {
                this.notice = { kind: "form-error", text: String(err.detail) };
                this.render();
                return;
            }
            if (err instanceof ApiError && err.status === 409) {
                this.notice = {
                    kind: "conflict",
                    text: "campaign changed under you; refresh to continue",
                };
                this.render();
                return;
            }
            this.renderRetryBanner(err);
            return;
        }
        await this.load();
    }

    private renderNotFound(): void {
        this.root.replaceChildren(
            el("div", "not-found", `campaign '${this.campaignId}' does not exist`),
        );
    }

    private renderRetryBanner(err: unknown): void {
        const banner = el("div", "retry-banner");
        banner.appendChild(el("span", undefined, `service unreachable (${String(err)})`));
        const retry = el("button", "retry-button", "retry") as HTMLButtonElement;
        retry.type = "button";
        retry.addEventListener("click", () => void this.load());
        banner.appendChild(retry);
        // keep whatever was rendered; data already shown is not lost
        const existing = this.root.querySelector(".retry-banner");
        if (existing) {
            existing.replaceWith(banner);
        } else {
            this.root.prepend(banner);
        }
    }

    private renderForm(): HTMLElement {
        const form = el("form", "measurement-form") as HTMLFormElement;
        form.appendChild(el("h3", undefined, "record a measurement"));
        const xInput = el("input", "input-x") as HTMLInputElement;
        xInput.name = "x";
        xInput.placeholder = "alternative index";
        xInput.value = this.formX;
        xInput.addEventListener("input", () => {
            this.formX = xInput.value;
        });
        const yInput = el("input", "input-y") as HTMLInputElement;
        yInput.name = "y";
        yInput.placeholder = "observed value";
        yInput.value = this.formY;
        yInput.addEventListener("input", () => {
            this.formY = yInput.value;
        });
        const submit = el("button", "submit-measurement", "record") as HTMLButtonElement;
        submit.type = "submit";
        form.appendChild(xInput);
        form.appendChild(yInput);
        form.appendChild(submit);
        form.addEventListener("submit", (event) => {
            event.preventDefault();
            void this.submit();
        });
        return form;
    }

    render(): void {
        if (!this.vm) {
            return;
        }
        const vm = this.vm;
        const page = el("div", "dashboard");
        const head = el("div", "dashboard-head");
        head.appendChild(el("h2", undefined, `campaign ${vm.campaignId}`));
        const step = el("span", "step-counter", `step ${vm.step}`);
        step.dataset.step = String(vm.step);
        head.appendChild(step);
        page.appendChild(head);
        if (this.notice) {
            page.appendChild(el("div", `notice ${this.notice.kind}`, this.notice.text));
        }
        const grid = el("div", "dashboard-grid");
        const left = el("div", "col");
        left.appendChild(el("h3", undefined, "belief over the curve"));
        left.appendChild(renderBeliefChart(vm));
        left.appendChild(el("h3", undefined, "candidate weights"));
        left.appendChild(renderWeightBars(vm.weights));
        left.appendChild(renderEntropyTrace(vm));
        const right = el("div", "col");
        right.appendChild(
            renderRecommendationCard(vm, () => {
                if (vm.recommendation) {
                    this.formX = String(vm.recommendation.x_index);
                    this.render();
                }
            }),
        );
        right.appendChild(this.renderForm());
        right.appendChild(renderHistory(vm));
        grid.appendChild(left);
        grid.appendChild(right);
        page.appendChild(grid);
        if (vm.recommendation) {
            const rows = sortWhatifRows(
                whatifRows(vm.alternatives, vm.recommendation.scores),
                this.sortKey,
                this.sortDescending,
            );
            page.appendChild(
                renderWhatifTable(
                    rows,
                    this.sortKey,
                    this.sortDescending,
                    (key) => {
                        if (key === this.sortKey) {
                            this.sortDescending = !this.sortDescending;
                        } else {
                            this.sortKey = key;
                            this.sortDescending = true;
                        }
                        this.render();
                    },
                    (x) => {
                        this.formX = String(x);
                        this.render();
                    },
                ),
            );
        }
        this.root.replaceChildren(page);
    }
}

export function renderCreatePanel(
    root: HTMLElement,
    api: ApiClient,
    onCreated: (campaignId: string) => void,
): void {
    const panel = el("div", "create-panel");
    panel.appendChild(el("h2", undefined, "start a campaign"));
    const area = el("textarea", "config-input") as HTMLTextAreaElement;
    area.rows = 14;
    area.placeholder = "paste a campaign config (JSON, truth_mode \"external\")";
    const button = el("button", "create-campaign", "create") as HTMLButtonElement;
    button.type = "button";
    const errors = el("div", "create-errors");
    button.addEventListener("click", async () => {
        errors.textContent = "";
        let config: Record<string, unknown>;
        try {
            config = JSON.parse(area.value);
        } catch (err) {
            errors.textContent = `not valid JSON: ${String(err)}`;
            return;
        }
        try {
            const created = await api.createCampaign(config);
            onCreated(created.campaign_id);
        } catch (err) {
            if (err instanceof ApiError) {
                const detail = err.detail as { errors?: string[] } | string;
                const messages =
                    typeof detail === "object" && detail?.errors ? detail.errors : [String(detail)];
                for (const message of messages) {
                    errors.appendChild(el("div", "create-error", message));
                }
            } else {
                errors.textContent = `service unreachable: ${String(err)}`;
            }
        }
    });
    panel.appendChild(area);
    panel.appendChild(button);
    panel.appendChild(errors);
    root.replaceChildren(panel);
}
