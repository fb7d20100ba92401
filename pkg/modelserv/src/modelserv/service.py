"""FastAPI application exposing the model service wire protocol.

Endpoints (UTF-8 JSON):

* ``POST /v1/translate``      batch translation
* ``POST /v1/classify``       batch classification with softmax probabilities
* ``POST /v1/train``          submit a fine-tuning job
* ``GET  /v1/jobs/{job_id}``  job status with the append-only evaluation log
* ``POST /v1/jobs/{job_id}/stop``  early-stop signal

Errors use ``{"error": {"kind": ..., "detail": ...}}`` with kinds
``validation``, ``unsupported_pair``, ``unknown_job``, and ``backend``.
"""

from __future__ import annotations

import argparse
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .jobs import Registry, ServiceError

log = logging.getLogger(__name__)


class TextItem(BaseModel):
    id: str
    text: str


class TranslateRequest(BaseModel):
    items: list[TextItem]
    src: str
    tgt: str
    model_id: str | None = None


class TranslatedItem(BaseModel):
    id: str
    translation: str


class TranslateResponse(BaseModel):
    items: list[TranslatedItem]
    model_id: str


class ClassifyRequest(BaseModel):
    items: list[TextItem]
    task: str
    model_id: str | None = None


class ClassifiedItem(BaseModel):
    id: str
    label: str
    probabilities: dict[str, float]


class ClassifyResponse(BaseModel):
    items: list[ClassifiedItem]
    model_id: str


class TrainRequest(BaseModel):
    kind: str
    corpora: dict[str, str]
    task: str | None = None
    src: str | None = None
    tgt: str | None = None
    hyperparams: dict = Field(default_factory=dict)
    eval_every: int = 100
    seed: int = 0
    pipeline: dict | None = None


class TrainResponse(BaseModel):
    job_id: str


class JobEval(BaseModel):
    index: int
    step: int
    metric: float
    model_id: str
    train_loss: float


class JobStatus(BaseModel):
    job_id: str
    status: str
    step: int | None = None
    metric: float | None = None
    model_id: str | None = None
    reason: str | None = None
    evals: list[JobEval] = Field(default_factory=list)
    hyperparams: dict | None = None


def create_app(registry: Registry | None = None) -> FastAPI:
    app = FastAPI(title="modelserv", version="0.1.0")
    app.state.registry = registry or Registry()

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": {"kind": exc.kind, "detail": exc.detail}},
        )

    @app.exception_handler(Exception)
    async def unexpected_error_handler(request: Request, exc: Exception):
        log.exception("unhandled error on %s", request.url.path)
        return JSONResponse(
            status_code=500,
            content={"error": {"kind": "backend", "detail": str(exc)}},
        )

    @app.post("/v1/translate", response_model=TranslateResponse)
    def translate(req: TranslateRequest):
        return app.state.registry.translate(
            [(item.id, item.text) for item in req.items], req.src, req.tgt, req.model_id
        )

    @app.post("/v1/classify", response_model=ClassifyResponse)
    def classify(req: ClassifyRequest):
        return app.state.registry.classify(
            [(item.id, item.text) for item in req.items], req.task, req.model_id
        )

    @app.post("/v1/train", response_model=TrainResponse)
    def train(req: TrainRequest):
        return {"job_id": app.state.registry.submit(req.model_dump())}

    @app.get("/v1/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str):
        return app.state.registry.status(job_id)

    @app.post("/v1/jobs/{job_id}/stop", response_model=JobStatus)
    def job_stop(job_id: str):
        return app.state.registry.stop(job_id)

    return app


def main() -> None:
    import uvicorn

    parser = argparse.ArgumentParser(prog="modelserv", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    args = parser.parse_args()
    uvicorn.run(create_app(), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
