// DOM and SVG builders for the dashboard. Numeric text is rendered with
// String(...) so displayed values stay verbatim copies of the server
// payload; scaling only affects geometry, never labels.

import type { CampaignViewModel, WhatifKey, WhatifRow } from "./viewmodel.js";

export function el(tag: string, className?: string, text?: string): HTMLElement {
    const node = document.createElement(tag);
    if (className) {
        node.className = className;
    }
    if (text !== undefined) {
        node.textContent = text;
    }
    return node;
}

function svgNode(tag: string, attrs: Record<string, string | number>): SVGElement {
    const node = document.createElementNS("http://www.w3.org/2000/svg", tag);
    for (const [key, value] of Object.entries(attrs)) {
        node.setAttribute(key, String(value));
    }
    return node;
}

function scale(values: number[], lo: number, hi: number): (v: number) => number {
    const min = Math.min(...values);
    const max = Math.max(...values);
    const span = max - min || 1;
    return (v) => lo + ((v - min) / span) * (hi - lo);
}

export function renderWeightBars(weights: number[]): HTMLElement {
    const wrap = el("div", "weight-bars");
    const peak = Math.max(...weights, 1e-12);
    weights.forEach((w, i) => {
        const row = el("div", "weight-row");
        row.appendChild(el("span", "weight-label", `c${i}`));
        const track = el("div", "weight-track");
        const bar = el("div", "weight-bar");
        bar.style.width = `${(w / peak) * 100}%`;
        track.appendChild(bar);
        row.appendChild(track);
        const value = el("span", "weight-value", String(w));
        value.dataset.candidate = String(i);
        row.appendChild(value);
        wrap.appendChild(row);
    });
    return wrap;
}

export function renderBeliefChart(vm: CampaignViewModel): HTMLElement {
    const width = 420;
    const height = 180;
    const pad = 10;
    const wrap = el("div", "belief-chart");
    const svg = svgNode("svg", { viewBox: `0 0 ${width} ${height}`, width, height });
    const xs = vm.alternatives.map((_, i) => i);
    const everything = vm.candidateCurves.flat().concat(vm.posteriorMean);
    const sx = scale(xs, pad, width - pad);
    const sy = scale(everything, height - pad, pad);
    const toPoints = (curve: number[]) =>
        curve.map((v, i) => `${sx(i)},${sy(v)}`).join(" ");
    for (const curve of vm.candidateCurves) {
        svg.appendChild(
            svgNode("polyline", {
                points: toPoints(curve),
                class: "candidate-curve",
                fill: "none",
            }),
        );
    }
    svg.appendChild(
        svgNode("polyline", {
            points: toPoints(vm.posteriorMean),
            class: "belief-mean-curve",
            fill: "none",
        }),
    );
    if (vm.recommendation) {
        svg.appendChild(
            svgNode("circle", {
                cx: sx(vm.recommendation.x_index),
                cy: sy(vm.posteriorMean[vm.recommendation.x_index]),
                r: 5,
                class: "recommended-point",
            }),
        );
    }
    wrap.appendChild(svg);
    return wrap;
}

export function renderEntropyTrace(vm: CampaignViewModel): HTMLElement {
    const width = 420;
    const height = 120;
    const pad = 10;
    const wrap = el("div", "entropy-trace");
    const svg = svgNode("svg", { viewBox: `0 0 ${width} ${height}`, width, height });
    const points = vm.entropyTrace;
    if (points.length) {
        const sx = scale(points.map((p) => p.step), pad, width - pad);
        const sy = scale(points.map((p) => p.entropy).concat(0), height - pad, pad);
        svg.appendChild(
            svgNode("polyline", {
                points: points.map((p) => `${sx(p.step)},${sy(p.entropy)}`).join(" "),
                class: "entropy-curve",
                fill: "none",
            }),
        );
    }
    wrap.appendChild(svg);
    const label = el("div", "entropy-now", `entropy ${String(vm.entropy)}`);
    label.dataset.entropy = String(vm.entropy);
    wrap.appendChild(label);
    return wrap;
}

export function renderRecommendationCard(vm: CampaignViewModel, onAccept: () => void): HTMLElement {
    const card = el("div", "recommendation-card");
    if (!vm.recommendation) {
        card.appendChild(el("p", "muted", "no recommendation available"));
        return card;
    }
    const rec = vm.recommendation;
    card.appendChild(el("h3", undefined, "next experiment"));
    const line = el("p", "recommendation-line");
    line.appendChild(el("span", "rec-policy", rec.policy));
    line.appendChild(el("span", "rec-x", ` x[${rec.x_index}] = (${rec.x_features.map(String).join(", ")})`));
    card.appendChild(line);
    const table = el("table", "score-breakdown");
    const header = el("tr");
    for (const name of ["score", "value at recommended x"]) {
        header.appendChild(el("th", undefined, name));
    }
    table.appendChild(header);
    for (const key of ["kgdp-f", "kgdp-h", "max-var", "posterior-mean"] as const) {
        const row = el("tr");
        row.appendChild(el("td", undefined, key));
        const cell = el("td", "score-cell", String(rec.scores[key][rec.x_index]));
        cell.dataset.score = key;
        row.appendChild(cell);
        table.appendChild(row);
    }
    card.appendChild(table);
    const accept = el("button", "accept-recommendation", "use this x") as HTMLButtonElement;
    accept.type = "button";
    accept.addEventListener("click", onAccept);
    card.appendChild(accept);
    return card;
}

export function renderWhatifTable(
    rows: WhatifRow[],
    sortKey: WhatifKey,
    descending: boolean,
    onSort: (key: WhatifKey) => void,
    onPick: (xIndex: number) => void,
): HTMLElement {
    const wrap = el("div", "whatif");
    wrap.appendChild(el("h3", undefined, "scores for every alternative"));
    const table = el("table", "whatif-table");
    const header = el("tr");
    const columns: Array<[WhatifKey | "features", string]> = [
        ["xIndex", "x"],
        ["features", "features"],
        ["kgdpF", "kgdp-f"],
        ["kgdpH", "kgdp-h"],
        ["maxVar", "max-var"],
    ];
    for (const [key, label] of columns) {
        const th = el("th", undefined, label + (key === sortKey ? (descending ? " ▼" : " ▲") : ""));
        if (key !== "features") {
            th.classList.add("sortable");
            th.addEventListener("click", () => onSort(key));
        }
        header.appendChild(th);
    }
    table.appendChild(header);
    for (const row of rows) {
        const tr = el("tr", "whatif-row");
        tr.dataset.x = String(row.xIndex);
        tr.appendChild(el("td", undefined, String(row.xIndex)));
        tr.appendChild(el("td", undefined, row.features.map(String).join(", ")));
        for (const [key, cls] of [
            ["kgdpF", "kgdp-f"],
            ["kgdpH", "kgdp-h"],
            ["maxVar", "max-var"],
        ] as const) {
            const cell = el("td", `score-${cls}`, String(row[key]));
            tr.appendChild(cell);
        }
        tr.addEventListener("click", () => onPick(row.xIndex));
        table.appendChild(tr);
    }
    wrap.appendChild(table);
    return wrap;
}

export function renderHistory(vm: CampaignViewModel): HTMLElement {
    const wrap = el("div", "history");
    wrap.appendChild(el("h3", undefined, `measurements (${vm.history.length})`));
    const table = el("table", "history-table");
    const header = el("tr");
    for (const name of ["step", "x", "y", "resampled"]) {
        header.appendChild(el("th", undefined, name));
    }
    table.appendChild(header);
    for (const row of vm.history) {
        const tr = el("tr", "history-row");
        tr.appendChild(el("td", undefined, String(row.step)));
        tr.appendChild(el("td", undefined, String(row.xIndex)));
        tr.appendChild(el("td", "history-y", String(row.y)));
        tr.appendChild(el("td", undefined, row.resampled ? "yes" : ""));
        table.appendChild(tr);
    }
    wrap.appendChild(table);
    return wrap;
}
