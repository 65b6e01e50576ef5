"""FastAPI service exposing every operation over HTTP.

The service is a stateless wrapper over the same handlers the CLI calls
in-process: requests name artifact paths on this machine, responses say
what was computed or written. Run it with::

    uvicorn steer.service.app:app

Errors raised by the operations map to the CLI's exit-code taxonomy:
input/validation problems are 400, numerical/training failures 422,
anything else 500, with a body of ``{"code", "category", "message"}``.
Requests that fail schema validation (malformed JSON, missing or extra
fields) never reach a handler and get FastAPI's standard 422
``{"detail": [...]}`` response instead.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, ops
from ..errors import InputError, NumericalError, SteerError
from .schemas import (
    AlignRequest,
    AlignResponse,
    HealthResponse,
    MatchedEvalRequest,
    MatchedEvalResponse,
    PrivacyEvalRequest,
    PrivacyEvalResponse,
    RecallEvalRequest,
    RecallEvalResponse,
    SearchRequest,
    SearchResponse,
    SynthRequest,
    SynthResponse,
    TransformRequest,
    TransformResponse,
)

app = FastAPI(title="steer", version=__version__)


@app.exception_handler(SteerError)
async def steer_error_handler(request: Request, exc: SteerError) -> JSONResponse:
    if isinstance(exc, InputError):
        status, category = 400, "input"
    elif isinstance(exc, NumericalError):
        status, category = 422, "numerical"
    else:
        status, category = 500, "error"
    return JSONResponse(
        status_code=status,
        content={"code": exc.code, "category": category, "message": str(exc)},
    )


@app.exception_handler(OSError)
async def os_error_handler(request: Request, exc: OSError) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={"code": "io", "category": "input", "message": str(exc)},
    )


@app.get("/health", response_model=HealthResponse)
async def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/align", response_model=AlignResponse)
async def align(req: AlignRequest) -> AlignResponse:
    return ops.align(req)


@app.post("/transform", response_model=TransformResponse)
async def transform(req: TransformRequest) -> TransformResponse:
    return ops.transform(req)


@app.post("/search", response_model=SearchResponse)
async def search(req: SearchRequest) -> SearchResponse:
    return ops.search(req)


@app.post("/eval/recall", response_model=RecallEvalResponse)
async def eval_recall(req: RecallEvalRequest) -> RecallEvalResponse:
    return ops.eval_recall(req)


@app.post("/eval/privacy", response_model=PrivacyEvalResponse)
async def eval_privacy(req: PrivacyEvalRequest) -> PrivacyEvalResponse:
    return ops.eval_privacy(req)


@app.post("/eval/matched", response_model=MatchedEvalResponse)
async def eval_matched(req: MatchedEvalRequest) -> MatchedEvalResponse:
    return ops.eval_matched(req)


@app.post("/synth", response_model=SynthResponse)
async def synth(req: SynthRequest) -> SynthResponse:
    return ops.synth(req)
