// Entry point: a tiny hash router between the create panel and dashboards.
// Served under /ui by the advisor process, so the API lives at the origin
// root.

import { ApiClient } from "./api.js";
import { App, renderCreatePanel } from "./app.js";

const api = new ApiClient("");

function route(): void {
    const root = document.getElementById("app");
    if (!root) {
        return;
    }
    const match = /^#\/c\/(.+)$/.exec(location.hash);
    if (match) {
        const app = new App(root, api, match[1]);
        void app.load();
    } else {
        renderCreatePanel(root, api, (campaignId) => {
            location.hash = `#/c/${campaignId}`;
        });
    }
}

window.addEventListener("hashchange", route);
route();
