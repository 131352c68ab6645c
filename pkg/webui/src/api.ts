// Typed client for the campaign advisor JSON API. Every number shown in the
// UI comes from these response payloads untouched.

export interface ScoreTable {
    "kgdp-f": number[];
    "kgdp-h": number[];
    "max-var": number[];
    "posterior-mean": number[];
}

export interface DerivedBlock {
    weights: number[];
    entropy: number;
    posterior_mean: number[];
    candidate_curves: number[][];
    x_hat: number | null;
    theta_hat: number[] | null;
    theta_hat_pool_index: number | null;
}

export interface CampaignEvent {
    event: "created" | "measurement";
    step: number;
    entropy?: number;
    x_index?: number;
    y?: number;
    resampled?: boolean;
    at: string;
}

export interface CampaignState {
    campaign_id: string;
    step: number;
    config: Record<string, unknown>;
    alternatives: number[][];
    history: { alt_indices: number[]; observations: number[] };
    candidates: { thetas: number[][]; log_weights: number[]; pool_indices: number[] };
    events: CampaignEvent[];
    derived: DerivedBlock;
}

export interface Recommendation {
    campaign_id: string;
    step: number;
    policy: string;
    x_index: number;
    x_features: number[];
    scores: ScoreTable;
}

export interface MeasurementResult extends DerivedBlock {
    campaign_id: string;
    step: number;
    resampled: boolean;
}

export interface CreateResult extends DerivedBlock {
    campaign_id: string;
    created: boolean;
    step: number;
}

export class ApiError extends Error {
    constructor(readonly status: number, readonly detail: unknown) {
        super(`HTTP ${status}: ${typeof detail === "string" ? detail : JSON.stringify(detail)}`);
    }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
    constructor(
        private readonly base: string = "",
        private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    ) {}

    private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
        const init: RequestInit = { method, headers: { "content-type": "application/json" } };
        if (body !== undefined) {
            init.body = JSON.stringify(body);
        }
        const response = await this.fetchFn(this.base + path, init);
        const payload = await response.json().catch(() => null);
        if (!response.ok) {
            throw new ApiError(response.status, payload?.detail ?? payload);
        }
        return payload as T;
    }

    createCampaign(config: Record<string, unknown>, idempotencyKey?: string): Promise<CreateResult> {
        const body: Record<string, unknown> = { config };
        if (idempotencyKey) {
            body.idempotency_key = idempotencyKey;
        }
        return this.request<CreateResult>("POST", "/campaigns", body);
    }

    getState(campaignId: string): Promise<CampaignState> {
        return this.request<CampaignState>("GET", `/campaigns/${campaignId}/state`);
    }

    getRecommendation(campaignId: string, policy?: string): Promise<Recommendation> {
        const query = policy ? `?policy=${encodeURIComponent(policy)}` : "";
        return this.request<Recommendation>("GET", `/campaigns/${campaignId}/recommendation${query}`);
    }

    recordMeasurement(
        campaignId: string,
        xIndex: number,
        y: number,
        expectedStep?: number,
    ): Promise<MeasurementResult> {
        const body: Record<string, unknown> = { x_index: xIndex, y };
        if (expectedStep !== undefined) {
            body.expected_step = expectedStep;
        }
        return this.request<MeasurementResult>("POST", `/campaigns/${campaignId}/measurements`, body);
    }
}
