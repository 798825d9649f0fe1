"""HTTP serving of a trained artifact behind the generation protocol.

Endpoints:

- ``GET /healthz`` — 503 with ``{"status": "loading"}`` until the artifact
  finishes loading, 200 with ``{"status": "ok"}`` afterwards.
- ``POST /generate`` — JSON ``{"prompt": str, "max_new_units": int,
  "greedy": bool}`` (the last two optional) returning ``{"text": str}``.
  Malformed bodies get 400 with an ``error`` field; request validation is
  done by hand so clients see 400, never a framework-specific 422.

Generation runs in the worker threadpool under the engine lock with no
per-request mutable state, so concurrent requests are isolated and greedy
decoding stays deterministic.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from todserve.model import GenerationEngine, load_artifact

logger = logging.getLogger(__name__)

DEFAULT_MAX_NEW_UNITS = 120


def _validate_payload(payload: object) -> tuple[dict | None, str | None]:
    """Check a decoded /generate body; returns (fields, problem)."""
    if not isinstance(payload, dict):
        return None, "request body must be a JSON object"
    if "prompt" not in payload:
        return None, "missing required field 'prompt'"
    prompt = payload["prompt"]
    if not isinstance(prompt, str):
        return None, "'prompt' must be a string"
    max_new_units = payload.get("max_new_units", DEFAULT_MAX_NEW_UNITS)
    if isinstance(max_new_units, bool) or not isinstance(max_new_units, int) \
            or max_new_units < 1:
        return None, "'max_new_units' must be a positive integer"
    greedy = payload.get("greedy", True)
    if not isinstance(greedy, bool):
        return None, "'greedy' must be a boolean"
    return {"prompt": prompt, "max_new_units": max_new_units,
            "greedy": greedy}, None


def create_app(artifact_dir: str | Path | None = None,
               engine_factory: Callable[[], GenerationEngine] | None = None,
               ) -> FastAPI:
    """Build the serving app; the artifact loads on a background thread.

    Exactly one of `artifact_dir` / `engine_factory` must be given (the
    factory exists so tests can control load timing). /healthz answers 503
    until the load completes.
    """
    if (artifact_dir is None) == (engine_factory is None):
        raise ValueError("pass exactly one of artifact_dir, engine_factory")
    if engine_factory is None:
        path = Path(artifact_dir)
        engine_factory = lambda: load_artifact(path)  # noqa: E731

    def _load(app: FastAPI) -> None:
        try:
            app.state.engine = engine_factory()
            logger.info("artifact loaded; serving")
        except Exception as exc:  # noqa: BLE001 - surfaced via /healthz
            app.state.load_error = f"{type(exc).__name__}: {exc}"
            logger.error("artifact load failed: %s", app.state.load_error)

    @asynccontextmanager
    async def _lifespan(app: FastAPI):
        threading.Thread(target=_load, args=(app,), name="artifact-loader",
                         daemon=True).start()
        yield

    app = FastAPI(lifespan=_lifespan)
    app.state.engine = None
    app.state.load_error = None

    @app.get("/healthz")
    def healthz() -> JSONResponse:
        if app.state.load_error is not None:
            return JSONResponse({"status": "failed",
                                 "error": app.state.load_error},
                                status_code=503)
        if app.state.engine is None:
            return JSONResponse({"status": "loading"}, status_code=503)
        return JSONResponse({"status": "ok"})

    @app.post("/generate")
    async def generate(request: Request) -> JSONResponse:
        engine = app.state.engine
        if engine is None:
            return JSONResponse({"error": "model not loaded"},
                                status_code=503)
        try:
            payload = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return JSONResponse({"error": "request body is not valid JSON"},
                                status_code=400)
        fields, problem = _validate_payload(payload)
        if problem is not None:
            return JSONResponse({"error": problem}, status_code=400)
        text = await run_in_threadpool(
            engine.generate, fields["prompt"],
            max_new_units=fields["max_new_units"], greedy=fields["greedy"])
        return JSONResponse({"text": text})

    return app


def run_server(artifact_dir: str | Path, host: str = "127.0.0.1",
               port: int = 8080) -> None:
    """Serve an artifact until interrupted. Raises OSError if the port is
    already taken (checked up front for a clean error)."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise OSError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    import uvicorn

    uvicorn.run(create_app(artifact_dir=artifact_dir), host=host, port=port,
                log_level="info")
