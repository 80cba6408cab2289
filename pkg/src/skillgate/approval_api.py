"""HTTP approval and audit API.

Four read-mostly endpoints serve the operator console and remote
deciders: the pending queue, the decision submission, the audit chain
view, and a health probe. Nothing here can mutate the audit log, the
trust root, loaded skills, or the policy document; the one write
endpoint resolves a pending decision and nothing else.

Bound to loopback and unauthenticated by default; non-loopback binds
should set a shared token, which clients send as X-Skillgate-Token.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .audit import read_records, verify_chain
from .session import Session

API_ENDPOINTS = (
    ("GET", "/v1/health"),
    ("GET", "/v1/pending"),
    ("POST", "/v1/decisions/{request_id}"),
    ("GET", "/v1/audit"),
)


class DecisionBody(BaseModel):
    decision: str

    model_config = {"extra": "forbid"}


def create_app(session: Session, shared_token: str | None = None) -> FastAPI:
    app = FastAPI(title="skillgate approval api", docs_url=None, redoc_url=None,
                  openapi_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed body"})

    def _check_token(request: Request) -> None:
        if shared_token is None:
            return
        if request.headers.get("x-skillgate-token") != shared_token:
            raise HTTPException(status_code=401, detail="bad or missing token")

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "profile": session.profile,
                "halted": session.halted, "records": len(session.log)}

    @app.get("/v1/pending")
    def pending(request: Request) -> dict:
        _check_token(request)
        queue = session.pending_queue
        items = queue.pending() if queue is not None else []
        loaded = session.loaded_skills()
        payload = []
        for item in items:
            skill = loaded.get(item.origin_skill_id)
            payload.append(
                {
                    "requestId": item.request_id,
                    "op": item.op,
                    "target": item.target,
                    "reasoning": item.reasoning,
                    "originSkillId": item.origin_skill_id,
                    "originLevel": skill.effective_level.token if skill else None,
                    "secondsRemaining": round(item.seconds_remaining(), 1),
                }
            )
        return {"pending": payload}

    @app.post("/v1/decisions/{request_id}")
    def decide(request_id: str, body: DecisionBody, request: Request) -> dict:
        _check_token(request)
        if body.decision not in ("approve", "deny"):
            raise HTTPException(status_code=400, detail="decision must be approve or deny")
        queue = session.pending_queue
        if queue is None:
            raise HTTPException(status_code=404, detail="no pending queue")
        status = queue.resolve(request_id, body.decision)
        if status == "unknown":
            raise HTTPException(status_code=404, detail="unknown requestId")
        if status == "already-decided":
            raise HTTPException(status_code=409, detail="request already decided")
        return {"status": "recorded", "requestId": request_id,
                "decision": body.decision}

    @app.get("/v1/audit")
    def audit(request: Request, from_seq: int = Query(0, alias="from")) -> dict:
        _check_token(request)
        # Re-read the persisted log when there is one, so tampering with
        # the file shows up on the very next poll.
        if session.log.path is not None and Path(session.log.path).exists():
            records = read_records(session.log.path)
        else:
            records = list(session.log.records)
        chain = verify_chain(records)
        view = []
        for record in records[max(0, from_seq):]:
            view.append(
                {
                    "seq": record.seq,
                    "recordType": record.record_type,
                    "requestId": record.request_id,
                    "payload": record.payload,
                    "prevHash": record.prev_hash,
                    "selfHash": record.self_hash,
                }
            )
        return {
            "records": view,
            "chainOk": chain.ok,
            "brokenAt": chain.broken_at,
            "total": len(records),
        }

    return app
