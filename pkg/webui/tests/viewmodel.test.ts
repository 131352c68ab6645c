// View-model unit tests: server numbers pass through untouched.

import { describe, expect, it } from "vitest";
import type { CampaignState, Recommendation } from "../src/api.js";
import { buildViewModel, sortWhatifRows, whatifRows } from "../src/viewmodel.js";
import { loadSessionFixture, recommendationResponses, stateResponses } from "./fake-service.js";

const fixture = loadSessionFixture();
const state = stateResponses(fixture)[1].json as CampaignState;
const rec = recommendationResponses(fixture)[1].json as Recommendation;

describe("buildViewModel", () => {
    it("copies server numbers without transformation", () => {
        const vm = buildViewModel(state, rec);
        expect(vm.weights).toEqual(state.derived.weights);
        expect(vm.posteriorMean).toEqual(state.derived.posterior_mean);
        expect(vm.candidateCurves).toEqual(state.derived.candidate_curves);
        expect(vm.entropy).toBe(state.derived.entropy);
        expect(vm.step).toBe(state.step);
    });

    it("derives the entropy trace from the event log", () => {
        const vm = buildViewModel(state, rec);
        const fromEvents = state.events
            .filter((e) => e.entropy !== undefined)
            .map((e) => ({ step: e.step, entropy: e.entropy as number }));
        expect(vm.entropyTrace).toEqual(fromEvents);
    });

    it("lists measurements as history rows", () => {
        const vm = buildViewModel(state, rec);
        expect(vm.history.length).toBe(state.history.alt_indices.length);
        vm.history.forEach((row, i) => {
            expect(row.xIndex).toBe(state.history.alt_indices[i]);
            expect(row.y).toBe(state.history.observations[i]);
        });
    });
});

describe("whatif rows", () => {
    it("maps score vectors by alternative index", () => {
        const rows = whatifRows(state.alternatives, rec.scores);
        expect(rows.length).toBe(state.alternatives.length);
        rows.forEach((row, i) => {
            expect(row.kgdpF).toBe(rec.scores["kgdp-f"][i]);
            expect(row.kgdpH).toBe(rec.scores["kgdp-h"][i]);
            expect(row.maxVar).toBe(rec.scores["max-var"][i]);
        });
    });

    it("sorting is a pure reordering", () => {
        const rows = whatifRows(state.alternatives, rec.scores);
        const sorted = sortWhatifRows(rows, "kgdpF", true);
        expect(sorted).not.toBe(rows);
        expect(new Set(sorted.map((r) => r.xIndex))).toEqual(new Set(rows.map((r) => r.xIndex)));
        for (let i = 1; i < sorted.length; i += 1) {
            expect(sorted[i - 1].kgdpF).toBeGreaterThanOrEqual(sorted[i].kgdpF);
        }
    });
});
