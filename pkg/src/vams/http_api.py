"""HTTP+JSON API over a LogServer. All binary fields are hex-encoded."""

from __future__ import annotations

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse

from .errors import SubmissionRejected, VamsError
from .server import LogServer
from .wire import (
    ManifestEnvelope,
    RequestEnvelope,
    consistency_proof_to_dict,
    inclusion_proof_to_dict,
    log_head_to_dict,
    map_head_to_dict,
    map_proof_to_dict,
)

MAX_ENTRY_PAGE = 1000


def create_app(server: LogServer) -> FastAPI:
    app = FastAPI(title="vams log server", docs_url=None, redoc_url=None)
    app.state.server = server

    @app.exception_handler(SubmissionRejected)
    async def _rejected(_request, exc: SubmissionRejected):
        return JSONResponse(status_code=400, content={"code": exc.code, "detail": exc.detail})

    @app.exception_handler(VamsError)
    async def _vams_error(_request, exc: VamsError):
        return JSONResponse(status_code=400, content={"code": "BAD_REQUEST", "detail": str(exc)})

    @app.get("/v1/info")
    def info():
        return {
            "server_public_key": server.public_key.hex(),
            "kdf_salt": server.config.kdf_salt.hex(),
            "batch_size": server.config.batch_size,
            "batch_timeout_ms": server.config.batch_timeout_ms,
        }

    @app.post("/v1/request")
    def submit_request(body: dict = Body(...)):
        envelope = RequestEnvelope.from_dict(body)
        index, head = server.submit_request(envelope)
        return {"index": index, "log_root": log_head_to_dict(head)}

    @app.post("/v1/audit")
    def submit_audit(body: dict = Body(...)):
        wrapper = ManifestEnvelope.from_dict(body)
        index, head = server.submit_manifest(wrapper)
        return {"index": index, "log_root": log_head_to_dict(head)}

    @app.post("/v1/flush")
    def flush():
        return {"map_root": map_head_to_dict(server.flush())}

    @app.get("/v1/log/root")
    def log_root(size: int | None = Query(default=None)):
        return log_head_to_dict(server.log_head(size))

    @app.get("/v1/log/entry/{index}")
    def log_entry(index: int):
        return {"index": index, "payload": server.entry(index).hex()}

    @app.get("/v1/log/entries")
    def log_entries(start: int = Query(ge=0), end: int = Query(ge=0)):
        if end - start > MAX_ENTRY_PAGE:
            raise HTTPException(status_code=400, detail=f"page too large (max {MAX_ENTRY_PAGE})")
        return {"start": start, "entries": [p.hex() for p in server.entries(start, end)]}

    @app.get("/v1/log/inclusion")
    def log_inclusion(index: int = Query(ge=0), size: int = Query(ge=1)):
        return inclusion_proof_to_dict(server.prove_inclusion(index, size))

    @app.get("/v1/log/consistency")
    def log_consistency(old: int = Query(ge=0), new: int = Query(ge=0)):
        return consistency_proof_to_dict(server.prove_consistency(old, new))

    @app.get("/v1/map/root")
    def map_root(revision: int | None = Query(default=None)):
        return map_head_to_dict(server.map_head(revision))

    @app.get("/v1/map/proof")
    def map_proof(key: str, revision: int | None = Query(default=None)):
        try:
            key_digest = bytes.fromhex(key)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"bad key hex: {exc}") from exc
        return map_proof_to_dict(server.map_proof(key_digest, revision))

    @app.get("/v1/headlog/root")
    def headlog_root(size: int | None = Query(default=None)):
        return log_head_to_dict(server.headlog_head(size))

    @app.get("/v1/headlog/entry/{index}")
    def headlog_entry(index: int):
        return {"index": index, "payload": server.headlog_entry(index).hex()}

    @app.get("/v1/headlog/inclusion")
    def headlog_inclusion(index: int = Query(ge=0), size: int = Query(ge=1)):
        return inclusion_proof_to_dict(server.headlog_prove_inclusion(index, size))

    @app.get("/v1/headlog/consistency")
    def headlog_consistency(old: int = Query(ge=0), new: int = Query(ge=0)):
        return consistency_proof_to_dict(server.headlog_prove_consistency(old, new))

    return app


def run_server(server: LogServer, host: str, port: int) -> None:
    """Blocking uvicorn run (used by the CLI)."""
    import uvicorn

    server.start_batcher()
    try:
        uvicorn.run(create_app(server), host=host, port=port, log_level="warning")
    finally:
        server.stop_batcher()
