"""FastAPI service wrapping the alignment package.

Models trained via POST /align stay in memory so later /embed calls can
project new samples without re-aligning.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from . import schemas
from .handlers import (
    ModelRegistry,
    StageError,
    handle_align,
    handle_benchmark,
    handle_embed,
    handle_evaluate,
    handle_sweep,
    handle_synth,
    model_info,
)


def create_app() -> FastAPI:
    app = FastAPI(title="fmalign", version=__version__)
    registry = ModelRegistry()
    app.state.registry = registry

    @app.exception_handler(StageError)
    async def stage_error_handler(_, exc: StageError):
        raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__, "models": registry.names()}

    @app.post("/align", response_model=schemas.AlignResponse)
    def align_endpoint(req: schemas.AlignRequest):
        try:
            response, _ = handle_align(req, registry=registry)
        except StageError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return response

    @app.get("/models")
    def list_models():
        return {"models": registry.names()}

    @app.get("/models/{name}", response_model=schemas.ModelInfo)
    def get_model(name: str):
        try:
            model = registry.get(name)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return model_info(name, model)

    @app.post("/models/{name}/embed", response_model=schemas.EmbedResponse)
    def embed_endpoint(name: str, req: schemas.EmbedRequest):
        try:
            model = registry.get(name)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        try:
            return handle_embed(req, model)
        except StageError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_endpoint(req: schemas.EvaluateRequest):
        try:
            return handle_evaluate(req)
        except StageError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth_endpoint(req: schemas.SynthRequest):
        try:
            return handle_synth(req)
        except StageError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/benchmark", response_model=schemas.BenchmarkResponse)
    def benchmark_endpoint(req: schemas.BenchmarkRequest):
        try:
            return handle_benchmark(req)
        except StageError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep_endpoint(req: schemas.SweepRequest):
        try:
            return handle_sweep(req)
        except StageError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return app
