"""HTTP facade over the engine.

Every state change maps to exactly one engine call; GET routes never
mutate. The session actor arrives in the X-Actor header (name or event
id, dev-mode plain header). Validation failures come back as 409 with the
machine-readable error code and the current head seq so clients can
resynchronize; permission failures are 403, unknown session actors 401,
parse errors 422.
"""

from __future__ import annotations

import asyncio
import re
import time
from typing import Any, Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .dump import event_to_record, loads_records
from .engine import CommitResult, Engine, LoadedModel
from .errors import (
    BslError,
    DumpFormatError,
    IntegrityError,
    ParseError,
    PermissionDenied,
    UnknownActor,
    UnknownIndividual,
    UnknownModel,
    ValidationError,
)
from .graph import Event
from .parser import parse_source

MAX_PAGE = 500
MAX_WAIT_SECONDS = 30.0


class IndividualCreate(BaseModel):
    name: str
    model: Optional[str] = None
    concept: Optional[str] = None


class EventSubmit(BaseModel):
    model_event: str
    value: Any = None


class ActorCreate(BaseModel):
    name: str
    roles: list[str] = Field(default_factory=list)


def _record(event: Event) -> dict:
    rec = event_to_record(event)
    rec["seq"] = event.seq
    return rec


def _commit_payload(result: CommitResult, engine: Engine) -> dict:
    return {
        "trigger": _record(result.trigger),
        "cascade": [_record(e) for e in result.events if e.id != result.trigger.id],
        "head_seq": engine.graph.head_seq,
    }


def _model_summary(model: LoadedModel) -> dict:
    return {
        "name": model.name,
        "concept": model.concept,
        "properties": [
            {
                "property": node.dotted,
                "type": node.ptype,
                "depth": node.depth,
                "computed": node.setvalue is not None,
                "restrictions": [
                    {"type": r.rtype, "value": r.value}
                    for r in node.decl.restrictions
                ],
            }
            for node in model.properties
        ],
    }


def _raise_mapped(exc: BslError, engine: Engine):
    if isinstance(exc, PermissionDenied):
        raise HTTPException(status_code=403, detail={"code": exc.code, "message": exc.message})
    if isinstance(exc, ParseError):
        raise HTTPException(status_code=422, detail={"code": exc.code, "message": str(exc)})
    if isinstance(exc, (DumpFormatError, IntegrityError)):
        raise HTTPException(status_code=422, detail={"code": exc.code, "message": exc.message})
    raise HTTPException(
        status_code=409,
        detail={
            "code": exc.code,
            "message": exc.message,
            "seq": engine.graph.head_seq,
        },
    )


def create_app(engine: Optional[Engine] = None, clock=None, cascade_cap: int = 10000) -> FastAPI:
    app = FastAPI(title="bslengine", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.engine = engine if engine is not None else Engine(
        clock=clock, cascade_cap=cascade_cap
    )

    def current_engine() -> Engine:
        return app.state.engine

    def session_actor(x_actor: Optional[str] = Header(default=None)) -> str:
        if x_actor is None or not x_actor.strip():
            raise HTTPException(
                status_code=401, detail={"code": "NoActor", "message": "X-Actor header required"}
            )
        eng = current_engine()
        try:
            return eng._actor_id(x_actor.strip())
        except UnknownActor as exc:
            raise HTTPException(
                status_code=401, detail={"code": exc.code, "message": exc.message}
            ) from None

    @app.get("/")
    def info() -> dict:
        eng = current_engine()
        return {
            "service": "bslengine",
            "version": "0.1.0",
            "head_seq": eng.graph.head_seq,
            "models": sorted(eng.models),
        }

    # --- actors ---

    @app.post("/actors", status_code=201)
    def create_actor(body: ActorCreate) -> dict:
        eng = current_engine()
        try:
            event = eng.register_actor(body.name, roles=body.roles)
        except BslError as exc:
            _raise_mapped(exc, eng)
        return {"actor": _record(event), "roles": sorted(eng.roles_of(event.id))}

    @app.get("/actors")
    def list_actors() -> list[dict]:
        eng = current_engine()
        return [
            {"id": e.id, "name": e.value, "roles": sorted(eng.roles_of(e.id))}
            for e in eng.actors()
        ]

    # --- models ---

    @app.post("/models", status_code=201)
    async def load_models(request: Request) -> dict:
        eng = current_engine()
        raw = (await request.body()).decode("utf-8")
        source = raw
        if request.headers.get("content-type", "").startswith("application/json"):
            import json

            try:
                payload = json.loads(raw)
            except json.JSONDecodeError:
                raise HTTPException(
                    status_code=422,
                    detail={"code": "BadRequest", "message": "body is not valid JSON"},
                ) from None
            if not isinstance(payload, dict) or "source" not in payload:
                raise HTTPException(
                    status_code=422,
                    detail={"code": "BadRequest", "message": 'JSON body needs a "source" key'},
                )
            source = payload["source"]
        try:
            doc = parse_source(source)
            loaded = eng.load_document(doc)
        except BslError as exc:
            _raise_mapped(exc, eng)
        return {
            "models": [_model_summary(m) for m in loaded],
            "head_seq": eng.graph.head_seq,
        }

    @app.get("/models")
    def list_models() -> list[dict]:
        eng = current_engine()
        return [_model_summary(m) for m in eng.models.values()]

    @app.get("/models/{name}")
    def get_model(name: str) -> dict:
        eng = current_engine()
        try:
            model = eng.resolve_model(name)
        except UnknownModel as exc:
            raise HTTPException(
                status_code=404, detail={"code": exc.code, "message": exc.message}
            ) from None
        return _model_summary(model)

    # --- individuals ---

    @app.post("/individuals", status_code=201)
    def create_individual(body: IndividualCreate, actor: str = Depends(session_actor)) -> dict:
        eng = current_engine()
        target = body.model or body.concept
        if not target:
            raise HTTPException(
                status_code=422,
                detail={"code": "BadRequest", "message": "model or concept required"},
            )
        try:
            result = eng.instantiate(target, body.name, actor=actor)
        except BslError as exc:
            _raise_mapped(exc, eng)
        return _commit_payload(result, eng)

    @app.get("/individuals")
    def list_individuals(model: Optional[str] = None) -> list[dict]:
        eng = current_engine()
        if model is not None:
            try:
                instances = eng.instances_of(eng.resolve_model(model))
            except UnknownModel as exc:
                raise HTTPException(
                    status_code=404, detail={"code": exc.code, "message": exc.message}
                ) from None
        else:
            instances = eng.instances()
        return [eng.describe_individual(e) for e in instances]

    def _individual(eng: Engine, individual_id: str) -> Event:
        # ids start with "#", which a browser treats as a fragment marker,
        # so URLs carry them bare; re-attach the prefix before resolving
        if re.fullmatch(r"[0-9a-f]{40}", individual_id):
            individual_id = "#" + individual_id
        try:
            return eng.resolve_individual(individual_id)
        except UnknownIndividual as exc:
            raise HTTPException(
                status_code=404, detail={"code": exc.code, "message": exc.message}
            ) from None

    @app.get("/individuals/{individual_id}")
    def get_individual(individual_id: str) -> dict:
        eng = current_engine()
        instance = _individual(eng, individual_id)
        history = [
            _record(e)
            for e in eng.graph.events
            if e.id == instance.id or eng.graph.owner_instance(e) is instance
        ]
        payload = eng.describe_individual(instance)
        payload["history"] = history
        return payload

    @app.get("/individuals/{individual_id}/enabled")
    def enabled(individual_id: str, actor: str = Depends(session_actor)) -> dict:
        eng = current_engine()
        instance = _individual(eng, individual_id)
        try:
            fields = eng.enabled_properties(instance, actor=actor)
        except BslError as exc:
            _raise_mapped(exc, eng)
        return {"individual": instance.id, "seq": eng.graph.head_seq, "fields": fields}

    @app.post("/individuals/{individual_id}/events", status_code=201)
    def submit_event(
        individual_id: str, body: EventSubmit, actor: str = Depends(session_actor)
    ) -> dict:
        eng = current_engine()
        instance = _individual(eng, individual_id)
        try:
            result = eng.submit(instance, body.model_event, body.value, actor=actor)
        except BslError as exc:
            _raise_mapped(exc, eng)
        return _commit_payload(result, eng)

    # --- log, integrity, dumps ---

    @app.get("/events")
    async def events(since_seq: int = -1, wait: float = 0.0) -> dict:
        eng = current_engine()
        deadline = time.monotonic() + min(max(wait, 0.0), MAX_WAIT_SECONDS)
        while True:
            rows = [e for e in eng.graph.events if e.seq > since_seq]
            if rows or time.monotonic() >= deadline:
                page = rows[:MAX_PAGE]
                return {
                    "events": [_record(e) for e in page],
                    "head_seq": eng.graph.head_seq,
                    "more": len(rows) > len(page),
                }
            await asyncio.sleep(0.05)

    @app.get("/integrity")
    def integrity() -> dict:
        eng = current_engine()
        report = eng.graph.verify()
        return {
            "valid": report.valid,
            "violations": [
                {
                    "seq": v.seq,
                    "event_id": v.event_id,
                    "code": v.code,
                    "detail": v.detail,
                }
                for v in report.violations
            ],
            "tainted": sorted(report.tainted),
        }

    @app.get("/export")
    def export() -> Response:
        eng = current_engine()
        return Response(content=eng.export_dump(), media_type="application/json")

    @app.post("/import")
    async def import_dump_route(request: Request) -> dict:
        eng = current_engine()
        raw = (await request.body()).decode("utf-8")
        try:
            records = loads_records(raw)
            fresh = Engine.from_records(
                records, clock=eng.clock, cascade_cap=eng.cascade_cap
            )
        except BslError as exc:
            _raise_mapped(exc, eng)
        for model in eng.models.values():
            try:
                fresh.attach_model(model.decl)
            except BslError:
                pass  # dump does not carry this model's template events
        app.state.engine = fresh
        return {"head_seq": fresh.graph.head_seq, "models": sorted(fresh.models)}

    return app
