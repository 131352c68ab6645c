// View model assembly: reshapes server responses for the dashboard without
// recomputing anything. The only client-side arithmetic anywhere is axis
// scaling inside the SVG renderers.

import type { CampaignState, Recommendation, ScoreTable } from "./api.js";

export interface EntropyPoint {
    step: number;
    entropy: number;
}

export interface HistoryRow {
    step: number;
    xIndex: number;
    y: number;
    resampled: boolean;
}

export interface CampaignViewModel {
    campaignId: string;
    step: number;
    entropy: number;
    weights: number[];
    posteriorMean: number[];
    candidateCurves: number[][];
    alternatives: number[][];
    xHat: number | null;
    thetaHat: number[] | null;
    entropyTrace: EntropyPoint[];
    history: HistoryRow[];
    recommendation: Recommendation | null;
}

export function buildViewModel(
    state: CampaignState,
    recommendation: Recommendation | null,
): CampaignViewModel {
    const entropyTrace: EntropyPoint[] = [];
    const history: HistoryRow[] = [];
    for (const event of state.events) {
        if (event.entropy !== undefined) {
            entropyTrace.push({ step: event.step, entropy: event.entropy });
        }
        if (event.event === "measurement") {
            history.push({
                step: event.step,
                xIndex: event.x_index ?? -1,
                y: event.y ?? NaN,
                resampled: event.resampled ?? false,
            });
        }
    }
    return {
        campaignId: state.campaign_id,
        step: state.step,
        entropy: state.derived.entropy,
        weights: state.derived.weights,
        posteriorMean: state.derived.posterior_mean,
        candidateCurves: state.derived.candidate_curves,
        alternatives: state.alternatives,
        xHat: state.derived.x_hat,
        thetaHat: state.derived.theta_hat,
        entropyTrace,
        history,
        recommendation,
    };
}

export interface WhatifRow {
    xIndex: number;
    features: number[];
    kgdpF: number;
    kgdpH: number;
    maxVar: number;
}

export type WhatifKey = "xIndex" | "kgdpF" | "kgdpH" | "maxVar";

export function whatifRows(alternatives: number[][], scores: ScoreTable): WhatifRow[] {
    return alternatives.map((features, i) => ({
        xIndex: i,
        features,
        kgdpF: scores["kgdp-f"][i],
        kgdpH: scores["kgdp-h"][i],
        maxVar: scores["max-var"][i],
    }));
}

export function sortWhatifRows(
    rows: WhatifRow[],
    key: WhatifKey,
    descending: boolean,
): WhatifRow[] {
    const sorted = [...rows].sort((a, b) => (a[key] as number) - (b[key] as number));
    return descending ? sorted.reverse() : sorted;
}
