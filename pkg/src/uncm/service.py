"""HTTP strength-meter service: seed creation (optionally private),
guess-number estimation, and seeded-bundle export.

Passwords are never logged or persisted; request logging is limited to
method, route, and seed ids. Seed creation is serialized per data
directory through a file lock; loaded models and built estimators are
immutable and shared across requests.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from filelock import FileLock
from pydantic import BaseModel, Field

from . import checkpoint
from .attention import DpSeedParams
from .emails import MalformedEmail
from .guessing import build_estimator
from .leaks import Account
from .model import DpModelMismatch, compute_seed

logger = logging.getLogger("uncm.service")

STRENGTH_THRESHOLDS = ((6.0, "weak"), (8.0, "fair"), (10.0, "strong"))


def strength_label(log10_guesses: float) -> str:
    for limit, label in STRENGTH_THRESHOLDS:
        if log10_guesses < limit:
            return label
    return "very strong"


@dataclass
class ServiceConfig:
    model_path: str
    data_dir: str
    host: str = "127.0.0.1"
    port: int = 8000
    estimator_n: int = 20_000  # latency default; 100k override available
    dp_default_z: float = 3.0

    @classmethod
    def load(cls, path=None, env=None) -> "ServiceConfig":
        """JSON config file with UNCM_-prefixed environment overrides."""
        env = os.environ if env is None else env
        raw: dict = {}
        if path:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        mapping = {
            "UNCM_MODEL_PATH": ("model_path", str),
            "UNCM_DATA_DIR": ("data_dir", str),
            "UNCM_HOST": ("host", str),
            "UNCM_PORT": ("port", int),
            "UNCM_ESTIMATOR_N": ("estimator_n", int),
            "UNCM_DP_DEFAULT_Z": ("dp_default_z", float),
        }
        for key, (name, cast) in mapping.items():
            if key in env:
                raw[name] = cast(env[key])
        if "model_path" not in raw or "data_dir" not in raw:
            raise ValueError("config requires model_path and data_dir")
        return cls(**raw)


class DpRequest(BaseModel):
    z: float = Field(gt=0)
    delta: float = Field(gt=0, lt=1)


class SeedRequest(BaseModel):
    emails: list[str] = Field(min_length=1)
    k: int | None = Field(default=None, gt=0)
    dp: DpRequest | None = None


class EstimateRequest(BaseModel):
    seed_id: str = Field(min_length=1)
    password: str = Field(min_length=1)


@dataclass
class _State:
    config: ServiceConfig
    uncm: object
    seeds_dir: Path
    lock: FileLock
    cache_lock: threading.Lock = field(default_factory=threading.Lock)
    estimators: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)


def build_app(config: ServiceConfig) -> FastAPI:
    uncm = checkpoint.load_uncm(config.model_path)
    data_dir = Path(config.data_dir)
    seeds_dir = data_dir / "seeds"
    seeds_dir.mkdir(parents=True, exist_ok=True)
    state = _State(
        config=config,
        uncm=uncm,
        seeds_dir=seeds_dir,
        lock=FileLock(str(data_dir / "seeds.lock")),
    )
    app = FastAPI(title="uncm strength meter")
    app.state.uncm = state

    def seed_path(seed_id: str) -> Path:
        if not seed_id.isalnum():
            raise HTTPException(status_code=404, detail="unknown seed_id")
        return state.seeds_dir / f"{seed_id}.seed"

    def get_model(seed_id: str):
        with state.cache_lock:
            if seed_id in state.models:
                return state.models[seed_id]
        if seed_id == "baseline":
            model = state.uncm.baseline_model()
        else:
            path = seed_path(seed_id)
            if not path.exists():
                raise HTTPException(status_code=404, detail="unknown seed_id")
            model = state.uncm.seeded_model(checkpoint.load_seed(path))
        with state.cache_lock:
            state.models[seed_id] = model
        return model

    def get_estimator(seed_id: str):
        with state.cache_lock:
            if seed_id in state.estimators:
                return state.estimators[seed_id]
        model = get_model(seed_id)
        rng = np.random.default_rng(abs(hash(seed_id)) % (2**32))
        est = build_estimator(model, state.config.estimator_n, rng)
        with state.cache_lock:
            state.estimators[seed_id] = est
        return est

    @app.post("/v1/seeds")
    def create_seed(body: SeedRequest):
        accounts = []
        for email in body.emails:
            accounts.append(Account(email=email, password=""))
        dp_params = None
        if body.dp is not None:
            if not state.uncm.private_capable:
                raise HTTPException(
                    status_code=409,
                    detail="dp requested but the loaded model is not the "
                    "DP-trained variant",
                )
            dp_params = DpSeedParams(z=body.dp.z, delta=body.dp.delta)
        rng_seed = int.from_bytes(os.urandom(8), "little")
        try:
            with state.lock:
                seed = compute_seed(
                    state.uncm, accounts, k=body.k, rng=rng_seed, dp_params=dp_params
                )
                checkpoint.save_seed(seed_path(seed.seed_id), seed)
        except DpModelMismatch as err:
            raise HTTPException(status_code=409, detail=str(err))
        except MalformedEmail:
            raise HTTPException(status_code=422, detail="emails: no parseable address")
        except ValueError as err:
            raise HTTPException(status_code=422, detail=f"emails: {err}")
        logger.info("seed created id=%s k_used=%d", seed.seed_id, seed.k_used)
        out = {"seed_id": seed.seed_id, "k_used": seed.k_used}
        if seed.dp is not None:
            out["epsilon"] = seed.dp.epsilon
        return out

    @app.post("/v1/estimate")
    def estimate(body: EstimateRequest):
        model = get_model(body.seed_id)
        logger.info("estimate requested seed_id=%s", body.seed_id)
        if not model.vocab.supports(body.password, model.dims.max_len):
            return {
                "seed_id": body.seed_id,
                "log10_guess_number": None,
                "log2_prob": None,
                "strength_label": "very strong",
                "outside_key_space": True,
            }
        est = get_estimator(body.seed_id)
        logp = model.log_prob(body.password)
        guesses = est.guess_number(math.exp(logp))
        log10_g = math.log10(guesses)
        return {
            "seed_id": body.seed_id,
            "log10_guess_number": log10_g,
            "log2_prob": logp / math.log(2),
            "strength_label": strength_label(log10_g),
            "outside_key_space": False,
        }

    @app.get("/v1/seeds")
    def list_seeds():
        out = []
        for path in state.seeds_dir.glob("*.seed"):
            seed = checkpoint.load_seed(path)
            entry = {
                "seed_id": seed.seed_id,
                "k_used": seed.k_used,
                "created_at": seed.created_at,
            }
            if seed.dp is not None:
                entry["epsilon"] = seed.dp.epsilon
            out.append(entry)
        out.sort(key=lambda e: e["created_at"])
        return out

    @app.get("/v1/export/{seed_id}")
    def export_seed(seed_id: str):
        model = get_model(seed_id)
        privacy = None
        if seed_id != "baseline":
            privacy = checkpoint.load_seed(seed_path(seed_id)).dp
        blob = checkpoint.seeded_bundle_bytes(model, privacy)
        logger.info("export seed_id=%s bytes=%d", seed_id, len(blob))
        return Response(content=blob, media_type="application/octet-stream")

    return app


def run(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(build_app(config), host=config.host, port=config.port)
