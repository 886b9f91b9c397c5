"""HTTP surface: the scorer wire protocol.

POST /score  {"query": str, "contexts": [{"id": str, "text": str}]}
             -> {"scores": [float]}, one score in [0, 1] per context, in order.
GET  /health -> {"status": "ok", "model": str}

Malformed requests return 400 with a reason; a query so long that no context
survives truncation returns 422. Requests are capped at 512 contexts;
batching happens server-side regardless of client batching. Inference runs
in eval mode, so repeated identical payloads return identical scores.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import MAX_REQUEST_CONTEXTS, ScorerServiceConfig
from .model import QueryTooLongError, ScorerBackend


class ContextIn(BaseModel):
    id: str
    text: str


class ScoreRequest(BaseModel):
    query: str
    contexts: list[ContextIn]


def create_app(backend: ScorerBackend, config: ScorerServiceConfig) -> FastAPI:
    app = FastAPI(title="relevance scorer service")
    # requests are handled concurrently; inference itself is serialized so the
    # model sees one batch at a time and no state is shared across requests
    inference_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.get("/health")
    def health():
        return {"status": "ok", "model": backend.name}

    @app.post("/score")
    def score(request: ScoreRequest):
        if len(request.contexts) > MAX_REQUEST_CONTEXTS:
            return JSONResponse(
                status_code=400,
                content={"error": f"at most {MAX_REQUEST_CONTEXTS} contexts per request"},
            )
        try:
            with inference_lock:
                scores = backend.score(
                    request.query,
                    [c.text for c in request.contexts],
                    batch_size=config.batch_size,
                )
        except QueryTooLongError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        return {"scores": scores}

    return app


def serve(config: ScorerServiceConfig) -> None:
    import uvicorn

    from .model import load_backend

    backend = load_backend(config.model, config.max_seq_len, device=config.device)
    app = create_app(backend, config)
    uvicorn.run(app, host="0.0.0.0", port=config.port, log_level="info")
