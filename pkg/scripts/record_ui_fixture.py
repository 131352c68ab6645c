"""Record a scripted advisor session as fixtures for the webui tests.

Drives the real service in-process and captures every request/response the
browser client would see, so the frontend test replays genuine payloads.
Regenerate with: python scripts/record_ui_fixture.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from kgdp.service import create_app

OUT = Path(__file__).resolve().parent.parent / "webui" / "tests" / "fixtures" / "session.json"

CONFIG = {
    "model": {"name": "asymmetric-unimodal", "k": 1, "grid_points": 8},
    "prior": {"ranges": [[2, 5], [0.2, 0.6]], "pool_size": 200, "seed": 12},
    "candidates": 4,
    "budget": 20,
    "policy": "kgdp-f",
    "sigma": 0.5,
    "truth_mode": "external",
    "resample": {"period": 2, "small_pool_size": 20},
    "seed": 77,
}

MEASUREMENTS = [1.1, 0.6, 1.4]


def main(tmp_dir: str = "/tmp/kgdp-ui-fixture-state") -> None:
    import shutil

    shutil.rmtree(tmp_dir, ignore_errors=True)
    client = TestClient(create_app(tmp_dir))
    recorded = []

    def record(method: str, path: str, body=None):
        if method == "GET":
            response = client.get(path)
        else:
            response = client.post(path, json=body)
        recorded.append(
            {
                "method": method,
                "path": path,
                "body": body,
                "status": response.status_code,
                "json": response.json(),
            }
        )
        return response.json()

    created = record("POST", "/campaigns", {"config": CONFIG})
    cid = created["campaign_id"]
    record("GET", f"/campaigns/{cid}/state")
    rec = record("GET", f"/campaigns/{cid}/recommendation")
    for step, y in enumerate(MEASUREMENTS):
        record(
            "POST",
            f"/campaigns/{cid}/measurements",
            {"x_index": rec["x_index"], "y": y, "expected_step": step},
        )
        record("GET", f"/campaigns/{cid}/state")
        rec = record("GET", f"/campaigns/{cid}/recommendation")

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"campaign_id": cid, "exchanges": recorded}, indent=1))
    resampled_steps = [
        x["json"]["step"] for x in recorded
        if x["method"] == "POST" and "measurements" in x["path"] and x["json"].get("resampled")
    ]
    print(f"recorded {len(recorded)} exchanges for campaign {cid} -> {OUT}")
    print(f"resample notices at steps: {resampled_steps}")


if __name__ == "__main__":
    main()
