"""FastAPI app exposing the engine over the provider wire protocol.

Request and response bodies are validated against the schemas shipped with
the client package, so both sides of the wire share one source of truth.
Every response carries the protocol version header; a request sent with a
different version is refused with 409 before touching the engine.
"""

from __future__ import annotations

from fastapi import Body, FastAPI, Request, Response
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse

from pecan.providers import templates, wire
from pecan.providers.types import PROTOCOL_HEADER, PROTOCOL_VERSION, SchemaViolation

from .engine import InferenceEngine, UnknownSessionError, WindowExceeded


def create_app(engine: InferenceEngine) -> FastAPI:
    app = FastAPI(title="pecan-sidecar", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def protocol_version_gate(request: Request, call_next):
        claimed = request.headers.get(PROTOCOL_HEADER)
        if claimed is not None and claimed != PROTOCOL_VERSION:
            response = JSONResponse(
                {
                    "error": "protocol version mismatch",
                    "detail": f"server speaks {PROTOCOL_VERSION!r}, request claimed {claimed!r}",
                },
                status_code=409,
            )
        else:
            response = await call_next(request)
        response.headers[PROTOCOL_HEADER] = PROTOCOL_VERSION
        return response

    def _error(status: int, message: str, detail: str | None = None) -> JSONResponse:
        body = {"error": message}
        if detail:
            body["detail"] = detail
        return JSONResponse(body, status_code=status)

    @app.exception_handler(UnknownSessionError)
    async def unknown_session(request: Request, exc: UnknownSessionError):
        return _error(404, str(exc))

    @app.exception_handler(WindowExceeded)
    async def window_exceeded(request: Request, exc: WindowExceeded):
        return _error(400, "window exceeded", str(exc))

    @app.exception_handler(SchemaViolation)
    async def schema_violation(request: Request, exc: SchemaViolation):
        return _error(400, "invalid request body", str(exc))

    @app.exception_handler(templates.UnknownTemplate)
    async def unknown_template(request: Request, exc: templates.UnknownTemplate):
        return _error(400, "unknown template", str(exc))

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "model": engine.model_id,
            "window": engine.config.window,
        }

    @app.post("/v1/summarize")
    async def summarize(payload: dict = Body(...)):
        wire.validate_message("summarize_request", payload)
        result = await run_in_threadpool(
            engine.summarize,
            [item["text"] for item in payload["batch"]],
            payload["template_id"],
        )
        return {
            "generated_text": result.generated_text,
            "generated_tokens": result.generated_tokens,
            "token_node_attention": result.token_node_attention,
            "tokens_prompt": result.tokens_prompt,
        }

    @app.post("/v1/session")
    async def create_session(payload: dict = Body(...)):
        wire.validate_message("session_request", payload)
        session_id, tokens_prompt = await run_in_threadpool(
            engine.create_session, payload["query"], payload["template_id"]
        )
        return {"session_id": session_id, "tokens_prompt": tokens_prompt}

    @app.post("/v1/decide")
    async def decide(payload: dict = Body(...)):
        wire.validate_message("decide_request", payload)
        result = await run_in_threadpool(
            engine.decide,
            payload["session_id"],
            [item["text"] for item in payload["append_nodes"]],
        )
        return {
            "p_yes_raw": result.p_yes_raw,
            "p_no_raw": result.p_no_raw,
            "node_query_attention": result.node_query_attention,
            "tokens_appended": result.tokens_appended,
            "tokens_scaffold": result.tokens_scaffold,
            "tokens_generated": result.tokens_generated,
            "context_tokens_total": result.context_tokens_total,
        }

    @app.post("/v1/answer")
    async def answer(payload: dict = Body(...)):
        wire.validate_message("answer_request", payload)
        result = await run_in_threadpool(engine.answer, payload["session_id"])
        return {
            "text": result.text,
            "tokens_prompt": result.tokens_prompt,
            "tokens_generated": result.tokens_generated,
        }

    @app.delete("/v1/session/{session_id}")
    async def delete_session(session_id: str):
        found = await run_in_threadpool(engine.delete_session, session_id)
        if not found:
            return _error(404, f"unknown session_id: {session_id!r}")
        return Response(status_code=204)

    @app.post("/v1/embed")
    async def embed(payload: dict = Body(...)):
        wire.validate_message("embed_request", payload)
        vectors, dim = await run_in_threadpool(engine.embed, payload["texts"])
        return {"vectors": vectors, "dim": dim}

    return app
