"""FastAPI application: an in-memory model registry plus experiment runs.

Models live only for the lifetime of the process; ``GET /models/{id}/file``
and ``POST /models/upload`` move them in and out as GPEXACT1/GPDISTIL1 bytes.
"""

from __future__ import annotations

import itertools
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response

from .. import harness, ops
from ..errors import ContractError, NumericalError
from ..io import distilled_to_bytes, exact_to_bytes, model_from_bytes
from ..inference import DistilledModel
from .schemas import (
    DistillRequest,
    DistillResponse,
    ExperimentRequest,
    Health,
    ModelInfo,
    PredictRequest,
    PredictResponse,
    TrainRequest,
)


class ModelRegistry:
    def __init__(self):
        self._models = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def add(self, model) -> str:
        with self._lock:
            key = f"m{next(self._ids)}"
            self._models[key] = model
        return key

    def get(self, key: str):
        with self._lock:
            model = self._models.get(key)
        if model is None:
            raise HTTPException(status_code=404, detail=f"no model {key!r}")
        return model

    def remove(self, key: str):
        with self._lock:
            if self._models.pop(key, None) is None:
                raise HTTPException(status_code=404, detail=f"no model {key!r}")

    def items(self):
        with self._lock:
            return list(self._models.items())

    def __len__(self):
        return len(self._models)


def _info(key, model) -> ModelInfo:
    return ModelInfo(id=key, **ops.describe(model))


def create_app(registry: ModelRegistry | None = None) -> FastAPI:
    app = FastAPI(title="gpdistill", version="0.1.0")
    reg = registry if registry is not None else ModelRegistry()
    app.state.registry = reg

    @app.exception_handler(ContractError)
    async def _contract(request: Request, exc: ContractError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(NumericalError)
    async def _numerical(request: Request, exc: NumericalError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=Health)
    def health():
        return Health(models=len(reg))

    @app.get("/models", response_model=list[ModelInfo])
    def list_models():
        return [_info(k, m) for k, m in reg.items()]

    @app.get("/models/{key}", response_model=ModelInfo)
    def get_model(key: str):
        return _info(key, reg.get(key))

    @app.delete("/models/{key}", status_code=204)
    def delete_model(key: str):
        reg.remove(key)
        return Response(status_code=204)

    @app.post("/models/train", response_model=ModelInfo)
    def train(req: TrainRequest):
        X = np.asarray(req.X, dtype=float)
        if X.ndim != 2:
            raise ContractError("X must be a list of equal-length rows")
        model = ops.train_teacher(
            X, req.y, kernel=req.kernel, lengthscale=req.lengthscale, noise_variance=req.noise_variance,
            steps=req.steps, learning_rate=req.learning_rate, standardize=req.standardize,
        )
        return _info(reg.add(model), model)

    @app.post("/models/{key}/distill", response_model=DistillResponse)
    def distill(key: str, req: DistillRequest):
        model = ops.distill_teacher(
            reg.get(key), m=req.m, b=req.b, mode=req.mode, eta=req.eta, iterations=req.iterations,
            line_search=req.line_search, seed=req.seed,
        )
        return DistillResponse(model=_info(reg.add(model), model), trace=[r.to_dict() for r in model.trace])

    @app.post("/models/{key}/predict", response_model=PredictResponse)
    def predict(key: str, req: PredictRequest):
        X = np.asarray(req.X, dtype=float)
        if X.ndim != 2:
            raise ContractError("X must be a list of equal-length rows")
        mean, var, clamped = ops.predict_raw(reg.get(key), X)
        return PredictResponse(mean=mean.tolist(), variance=var.tolist(), clamped=clamped.tolist())

    @app.get("/models/{key}/file")
    def download(key: str):
        model = reg.get(key)
        buf = distilled_to_bytes(model) if isinstance(model, DistilledModel) else exact_to_bytes(model)
        return Response(content=buf, media_type="application/octet-stream")

    @app.post("/models/upload", response_model=ModelInfo)
    async def upload(request: Request):
        model = model_from_bytes(await request.body())
        return _info(reg.add(model), model)

    @app.post("/experiments/{name}")
    def experiment(name: str, req: ExperimentRequest):
        if "experiment" in req.config:
            raise ContractError("put the experiment name in the URL, not in the config")
        cfg = harness.RunConfig.from_dict({"experiment": name, **req.config})
        return harness.run(cfg).to_dict()

    return app
