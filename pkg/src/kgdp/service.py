"""HTTP advisor for live experimental campaigns.

Wraps the campaign engine for real (expensive, human-run) experiments:
the service recommends the next alternative, records measurements entered
by the experimenter, and exposes the belief state. The truth is unknown
here, so only truth-free quantities are reported (entropy, the belief-mean
curve, the current parameter estimate); opportunity-cost metrics never
appear. A measurement may be recorded at any alternative, not just the
recommended one: the weight update is policy-agnostic.

State is one JSON document per campaign, written atomically
(write-temp-then-rename) before the response is sent, so a crash mid
request never leaves a half-applied state on disk.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse

from .belief import ResidualAccumulator, accumulate_residuals, batch_update
from .config import ConfigError, parse_config
from .core import CandidateSet, MeasurementHistory, NoiseModel, entropy, posterior_mean_values
from .benchmarks import make_pool
from .harness import CampaignEngine, draw_initial_candidates
from .policies import PolicyKind

__all__ = ["CampaignStore", "StateCorruptionError", "create_app"]

_WEIGHT_CONSISTENCY_ATOL = 1e-8


class StateCorruptionError(RuntimeError):
    """A persisted campaign no longer agrees with its own history."""


def _replace_file(tmp: Path, dst: Path) -> None:
    # Separated out so crash-injection tests can fail the rename step.
    os.replace(tmp, dst)


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


class CampaignStore:
    """One JSON document per campaign under a state directory."""

    def __init__(self, state_dir: Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._pool_cache: dict[str, np.ndarray] = {}

    def _path(self, campaign_id: str) -> Path:
        return self.state_dir / f"{campaign_id}.json"

    def lock_for(self, campaign_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(campaign_id, threading.Lock())

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.state_dir.glob("*.json"))

    def exists(self, campaign_id: str) -> bool:
        return self._path(campaign_id).exists()

    def load(self, campaign_id: str) -> dict:
        path = self._path(campaign_id)
        if not path.exists():
            raise KeyError(campaign_id)
        return json.loads(path.read_text())

    def save(self, doc: dict) -> None:
        path = self._path(doc["campaign_id"])
        tmp = path.with_name(path.name + ".tmp")
        payload = json.dumps(doc, indent=1)
        with open(tmp, "w") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        _replace_file(tmp, path)

    def find_by_idempotency_key(self, key: str) -> Optional[str]:
        for campaign_id in self.list_ids():
            if self.load(campaign_id).get("idempotency_key") == key:
                return campaign_id
        return None

    def pool_for(self, prior) -> np.ndarray:
        cache_key = json.dumps(
            [prior.ranges.tolist(), prior.pool_size, prior.seed], separators=(",", ":")
        )
        pool = self._pool_cache.get(cache_key)
        if pool is None:
            pool = make_pool(prior)
            self._pool_cache[cache_key] = pool
        return pool


def _build_engine(store: CampaignStore, doc: dict) -> CampaignEngine:
    """Rebuild the live engine from a persisted document, verifying weights.

    The pool is regenerated from the prior seed and the residual sums are
    replayed from the history, so the document stays small; the stored
    log-weights must match a from-scratch reweighting of the history or the
    document is declared corrupt.
    """
    cfg = parse_config(doc["config"])
    pool = store.pool_for(cfg.prior)
    history = MeasurementHistory(
        alt_indices=np.asarray(doc["history"]["alt_indices"], dtype=np.int64),
        observations=np.asarray(doc["history"]["observations"], dtype=np.float64),
    )
    noise = NoiseModel(sigma=cfg.sigma)
    stored_lw = np.asarray(doc["candidates"]["log_weights"], dtype=np.float64)
    candidates = batch_update(
        np.asarray(doc["candidates"]["thetas"], dtype=np.float64),
        history,
        cfg.model,
        noise,
        cfg.alternatives,
        pool_indices=np.asarray(doc["candidates"]["pool_indices"], dtype=np.int64),
    )
    if not np.allclose(candidates.log_weights, stored_lw, atol=_WEIGHT_CONSISTENCY_ATOL, rtol=0):
        raise StateCorruptionError(
            f"campaign {doc['campaign_id']}: stored weights disagree with the history"
        )
    acc = ResidualAccumulator.empty(pool.shape[0])
    columns: dict[int, np.ndarray] = {}
    for m, y in history.entries:
        col = columns.get(m)
        if col is None:
            col = cfg.model.values_at(pool, cfg.alternatives.features[m])
            columns[m] = col
        acc = accumulate_residuals(acc, pool, cfg.alternatives[m], y, cfg.model, values=col)
    resampler_rng = np.random.default_rng()
    resampler_rng.bit_generator.state = doc["rng"]["resampler_state"]
    engine = CampaignEngine(
        model=cfg.model,
        alternatives=cfg.alternatives,
        pool_thetas=pool,
        candidates=candidates.with_log_weights(stored_lw),
        noise=noise,
        policy=cfg.policy,
        quadrature=cfg.quadrature,
        resample_cfg=cfg.resample,
        policy_seed=int(doc["rng"]["policy_seed"]),
        resampler_rng=resampler_rng,
        history=history,
        residuals=acc,
    )
    return engine


def _derived_block(engine: CampaignEngine) -> dict:
    cs = engine.candidates
    block = {
        "weights": [float(w) for w in cs.weights],
        "entropy": entropy(cs),
        "posterior_mean": [float(v) for v in posterior_mean_values(cs)],
        "candidate_curves": [[float(v) for v in row] for row in cs.values],
        "x_hat": None,
        "theta_hat": None,
        "theta_hat_pool_index": None,
    }
    if engine.step > 0:
        x_hat, theta_hat, pool_idx = engine.estimates()
        block.update(
            x_hat=x_hat,
            theta_hat=[float(v) for v in theta_hat],
            theta_hat_pool_index=pool_idx,
        )
    return block


def _doc_from_engine(doc: dict, engine: CampaignEngine) -> dict:
    cs = engine.candidates
    doc = dict(doc)
    doc["step"] = engine.step
    doc["history"] = {
        "alt_indices": [int(i) for i in engine.history.alt_indices],
        "observations": [float(y) for y in engine.history.observations],
    }
    doc["candidates"] = {
        "thetas": [[float(v) for v in row] for row in cs.thetas],
        "log_weights": [float(v) for v in cs.log_weights],
        "pool_indices": [int(i) for i in cs.pool_indices],
    }
    doc["rng"] = {
        "resampler_state": engine.resampler_rng.bit_generator.state,
        "policy_seed": engine.policy_seed,
    }
    doc["derived"] = _derived_block(engine)
    return doc


def create_app(state_dir, ui_dir=None) -> FastAPI:
    """Build the advisor application over a state directory.

    ``ui_dir`` optionally mounts a built browser frontend at /ui; the JSON
    API is self-contained without it.
    """
    store = CampaignStore(Path(state_dir))
    app = FastAPI(title="campaign advisor", version="0.1.0")
    app.state.store = store
    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    @app.exception_handler(StateCorruptionError)
    async def _corrupt(request, exc):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    def _load_or_404(campaign_id: str) -> dict:
        try:
            return store.load(campaign_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown campaign '{campaign_id}'")

    @app.get("/campaigns")
    def list_campaigns():
        out = []
        for campaign_id in store.list_ids():
            doc = store.load(campaign_id)
            out.append({"campaign_id": campaign_id, "step": doc["step"]})
        return {"campaigns": out}

    @app.post("/campaigns")
    def create_campaign(body: dict = Body(...)):
        config_doc = body.get("config")
        key = body.get("idempotency_key")
        if config_doc is None or not isinstance(config_doc, dict):
            raise HTTPException(status_code=400, detail={"errors": ["missing 'config' object"]})
        if key is not None:
            existing = store.find_by_idempotency_key(str(key))
            if existing is not None:
                doc = store.load(existing)
                return {
                    "campaign_id": existing,
                    "created": False,
                    "step": doc["step"],
                    **doc["derived"],
                }
        try:
            cfg = parse_config(config_doc)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail={"errors": exc.errors})
        if cfg.truth_mode != "external":
            raise HTTPException(
                status_code=400,
                detail={"errors": ["live campaigns require truth_mode 'external'"]},
            )
        pool = store.pool_for(cfg.prior)
        ss = np.random.SeedSequence(cfg.base_seed)
        streams = dict(zip(("noise", "candidate-init", "policy", "resampler"), ss.spawn(4)))
        rng_init = np.random.default_rng(streams["candidate-init"])
        _, rows = draw_initial_candidates(rng_init, cfg.prior.pool_size, cfg.n_candidates, "external")
        candidates = CandidateSet.build(
            pool[rows], cfg.model, cfg.alternatives, pool_indices=rows
        )
        engine = CampaignEngine(
            model=cfg.model,
            alternatives=cfg.alternatives,
            pool_thetas=pool,
            candidates=candidates,
            noise=NoiseModel(sigma=cfg.sigma),
            policy=cfg.policy,
            quadrature=cfg.quadrature,
            resample_cfg=cfg.resample,
            policy_seed=int(streams["policy"].generate_state(1, dtype=np.uint64)[0]),
            resampler_rng=np.random.default_rng(streams["resampler"]),
        )
        campaign_id = uuid.uuid4().hex[:12]
        doc = {
            "campaign_id": campaign_id,
            "idempotency_key": str(key) if key is not None else None,
            "config": config_doc,
            "alternatives": [[float(v) for v in row] for row in cfg.alternatives.features],
            "events": [
                {
                    "event": "created",
                    "step": 0,
                    "entropy": entropy(engine.candidates),
                    "at": _utcnow(),
                }
            ],
        }
        doc = _doc_from_engine(doc, engine)
        store.save(doc)
        return {"campaign_id": campaign_id, "created": True, "step": 0, **doc["derived"]}

    @app.get("/campaigns/{campaign_id}")
    def campaign_summary(campaign_id: str):
        doc = _load_or_404(campaign_id)
        return {
            "campaign_id": campaign_id,
            "step": doc["step"],
            "policy": doc["config"]["policy"],
            "n_alternatives": len(doc["derived"]["posterior_mean"]),
            "n_candidates": len(doc["candidates"]["log_weights"]),
            **doc["derived"],
        }

    @app.get("/campaigns/{campaign_id}/recommendation")
    def recommendation(campaign_id: str, policy: Optional[str] = Query(default=None)):
        doc = _load_or_404(campaign_id)
        override = None
        if policy is not None:
            try:
                override = PolicyKind(policy)
            except ValueError:
                valid = ", ".join(p.value for p in PolicyKind)
                raise HTTPException(
                    status_code=400, detail=f"unknown policy '{policy}'; valid values: {valid}"
                )
        engine = _build_engine(store, doc)
        x_index = engine.recommend(override)
        used = (override or engine.policy).value
        return {
            "campaign_id": campaign_id,
            "step": engine.step,
            "policy": used,
            "x_index": x_index,
            "x_features": [float(v) for v in engine.alternatives.features[x_index]],
            "scores": engine.score_table(),
        }

    @app.post("/campaigns/{campaign_id}/measurements")
    def record_measurement(campaign_id: str, body: dict = Body(...)):
        doc = _load_or_404(campaign_id)
        if "x_index" not in body or "y" not in body:
            raise HTTPException(status_code=422, detail="body needs 'x_index' and 'y'")
        x_index = body["x_index"]
        y = body["y"]
        if not isinstance(x_index, int) or isinstance(x_index, bool):
            raise HTTPException(status_code=422, detail="'x_index' must be an integer")
        if isinstance(y, bool) or not isinstance(y, (int, float)) or not math.isfinite(y):
            raise HTTPException(status_code=422, detail="'y' must be a finite number")
        expected_step = body.get("expected_step")
        lock = store.lock_for(campaign_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="campaign is being mutated concurrently")
        try:
            doc = store.load(campaign_id)
            if expected_step is not None and expected_step != doc["step"]:
                raise HTTPException(
                    status_code=409,
                    detail=f"expected step {expected_step}, campaign is at step {doc['step']}",
                )
            engine = _build_engine(store, doc)
            if not 0 <= x_index < len(engine.alternatives):
                raise HTTPException(
                    status_code=422,
                    detail=f"x_index {x_index} out of range [0, {len(engine.alternatives)})",
                )
            outcome = engine.record(x_index, float(y))
            doc["events"] = doc["events"] + [
                {
                    "event": "measurement",
                    "step": outcome.step,
                    "x_index": int(x_index),
                    "y": float(y),
                    "resampled": outcome.resampled,
                    "entropy": entropy(engine.candidates),
                    "at": _utcnow(),
                }
            ]
            doc = _doc_from_engine(doc, engine)
            store.save(doc)
        finally:
            lock.release()
        return {
            "campaign_id": campaign_id,
            "step": doc["step"],
            "resampled": outcome.resampled,
            **doc["derived"],
        }

    @app.get("/campaigns/{campaign_id}/state")
    def full_state(campaign_id: str):
        return _load_or_404(campaign_id)

    return app
