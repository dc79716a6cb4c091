"""HTTP decision and administration service.

Callers authenticate with ``Authorization: Bearer <token>``; the token table
maps tokens to actor ids. ``X-Acting-As: <actor-id>`` makes the request act as
another actor, which is re-checked against the live graph on every request.
Every response body carries ``version``, the last event seq it reflects.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import authz, errors
from .model import Actor, Permission, Relation, Store, Tie

log = logging.getLogger(__name__)

CONTACTS_PAGE_SIZE = 100

_STATUS = (
    (errors.InvalidInput, 400),
    (errors.Forbidden, 403),
    (errors.NotFound, 404),
    (errors.Conflict, 409),
    (errors.InvariantError, 422),
)


def status_for(exc: errors.TierbacError) -> int:
    for cls, status in _STATUS:
        if isinstance(exc, cls):
            return status
    return 500


class Unauthorized(errors.TierbacError):
    tag = "unauthorized"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    store: Optional[str] = None
    tokens: dict[str, str] = field(default_factory=dict)
    anonymous_actor: Optional[str] = None

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ServiceConfig":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        cfg = cls(**raw)
        if cfg.store is not None:
            cfg.store = str((path.parent / cfg.store).resolve())
        return cfg


@dataclass(frozen=True)
class Session:
    token: Optional[str]
    agent: str
    acting_as: str

    @property
    def acting(self) -> authz.ActingPair:
        return authz.ActingPair(self.agent, self.acting_as)


# ------------------------------------------------------------- documents


def actor_doc(a: Actor) -> dict[str, Any]:
    return {"id": a.id, "name": a.name, "kind": a.kind}


def permission_doc(p: Permission) -> dict[str, str]:
    return {"action": p.action, "object_class": p.object_class}


def relation_doc(r: Relation) -> dict[str, Any]:
    return {
        "id": r.id,
        "owner": r.owner,
        "name": r.name,
        "reciprocal": r.reciprocal,
        "public_flag": r.public_flag,
        "permissions": [permission_doc(p) for p in sorted(r.permissions)],
        "weaker": sorted(r.weaker),
    }


def tie_doc(t: Tie) -> dict[str, Any]:
    return {
        "id": t.id,
        "sender": t.sender,
        "relation": t.relation,
        "receiver": t.receiver,
        "state": t.state.value,
        "paired_with": t.paired_with,
    }


def decision_doc(d: authz.Decision, version: int) -> dict[str, Any]:
    return {"allowed": d.allowed, "reason": d.reason.value, "version": version}


def effective_doc(perms: frozenset[Permission], version: int) -> dict[str, Any]:
    return {"permissions": [permission_doc(p) for p in sorted(perms)], "version": version}


def contacts_doc(pairs: set[tuple[str, str]], version: int, page: int = 0) -> dict[str, Any]:
    rows = sorted(pairs)
    start = page * CONTACTS_PAGE_SIZE
    chunk = rows[start : start + CONTACTS_PAGE_SIZE]
    return {
        "contacts": [{"actor": a, "relation": r} for a, r in chunk],
        "page": page,
        "total": len(rows),
        "version": version,
    }


def error_doc(exc: errors.TierbacError) -> dict[str, str]:
    return {"error": exc.tag, "detail": exc.detail}


# ---------------------------------------------------------------- bodies


class ActorIn(BaseModel):
    name: str
    kind: str


class RelationIn(BaseModel):
    name: str
    reciprocal: bool = False
    public_flag: bool = False


class PermissionIn(BaseModel):
    action: str
    object_class: str


class StrongerIn(BaseModel):
    weaker: str


class TieIn(BaseModel):
    relation: str
    receiver: str
    sender: Optional[str] = None


class AcceptIn(BaseModel):
    reverse_relation: str


# ------------------------------------------------------------------- app


def authenticate(store: Store, config: ServiceConfig, token: Optional[str], acting_as: Optional[str]) -> Session:
    """Map a bearer token (or anonymity) to a session and validate acting-as."""
    if token is None:
        if config.anonymous_actor is None:
            raise Unauthorized("missing bearer token")
        agent = config.anonymous_actor
    elif token in config.tokens:
        agent = config.tokens[token]
    else:
        raise Unauthorized("unknown token")
    with store.lock:
        try:
            store.actor(agent)
        except errors.UnknownActor:
            raise Unauthorized("token maps to an unknown actor") from None
        principal = acting_as or agent
        if principal != agent:
            store.actor(principal)
            if not authz.can_represent(store, agent, principal):
                raise errors.RepresentationDenied(f"{agent} cannot act as {principal}")
    return Session(token, agent, principal)


def _bearer(authorization: Optional[str]) -> Optional[str]:
    if authorization is None:
        return None
    scheme, _, value = authorization.partition(" ")
    if scheme.lower() != "bearer" or not value.strip():
        raise Unauthorized("expected 'Authorization: Bearer <token>'")
    return value.strip()


def create_app(store: Store, config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="tierbac", version="1")
    app.state.store = store
    app.state.config = config

    @app.exception_handler(errors.TierbacError)
    async def _domain_error(request: Request, exc: errors.TierbacError) -> JSONResponse:
        status = 401 if isinstance(exc, Unauthorized) else status_for(exc)
        return JSONResponse(error_doc(exc), status_code=status)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError) -> JSONResponse:
        detail = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        return JSONResponse({"error": "malformed", "detail": detail}, status_code=400)

    def session(
        authorization: Optional[str] = Header(None),
        x_acting_as: Optional[str] = Header(None),
    ) -> Session:
        return authenticate(store, config, _bearer(authorization), x_acting_as)

    def created(doc: dict[str, Any]) -> JSONResponse:
        return JSONResponse(doc, status_code=201)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": store.version}

    @app.post("/actors")
    def create_actor(body: ActorIn, s: Session = Depends(session)) -> JSONResponse:
        with store.lock:
            actor_id = store.create_actor(body.name, body.kind)
            return created({"actor": actor_doc(store.actor(actor_id)), "version": store.version})

    @app.get("/actors")
    def list_actors(name: Optional[str] = None, s: Session = Depends(session)) -> dict:
        with store.lock:
            found = store.actors() if name is None else store.find_actors(name)
            return {"actors": [actor_doc(a) for a in found], "version": store.version}

    @app.get("/actors/{actor_id}")
    def get_actor(actor_id: str, s: Session = Depends(session)) -> dict:
        with store.lock:
            return {"actor": actor_doc(store.actor(actor_id)), "version": store.version}

    @app.post("/actors/{actor_id}/relations")
    def define_relation(actor_id: str, body: RelationIn, s: Session = Depends(session)) -> JSONResponse:
        with store.lock:
            rid = store.define_relation(actor_id, body.name, body.reciprocal, body.public_flag, acting=s.acting)
            return created({"relation": relation_doc(store.relation(rid)), "version": store.version})

    @app.get("/actors/{actor_id}/relations")
    def list_relations(actor_id: str, s: Session = Depends(session)) -> dict:
        with store.lock:
            rels = store.relations_of(actor_id)
            return {"relations": [relation_doc(r) for r in rels], "version": store.version}

    @app.get("/relations/{relation_id}")
    def get_relation(relation_id: str, s: Session = Depends(session)) -> dict:
        with store.lock:
            return {"relation": relation_doc(store.relation(relation_id)), "version": store.version}

    @app.post("/relations/{relation_id}/permissions")
    def grant(relation_id: str, body: PermissionIn, s: Session = Depends(session)) -> dict:
        with store.lock:
            store.grant_permission(s.acting, relation_id, Permission(body.action, body.object_class))
            return {"relation": relation_doc(store.relation(relation_id)), "version": store.version}

    @app.delete("/relations/{relation_id}/permissions")
    async def revoke(relation_id: str, request: Request, s: Session = Depends(session)) -> dict:
        raw = await request.body()
        if raw:
            try:
                body = PermissionIn.model_validate_json(raw)
            except ValueError as exc:
                raise errors.InvalidInput(f"bad permission body: {exc}") from None
            action, object_class = body.action, body.object_class
        else:
            action = request.query_params.get("action")
            object_class = request.query_params.get("object_class")
            if action is None or object_class is None:
                raise errors.InvalidInput("action and object_class are required")
        with store.lock:
            store.revoke_permission(s.acting, relation_id, Permission(action, object_class))
            return {"relation": relation_doc(store.relation(relation_id)), "version": store.version}

    @app.post("/relations/{relation_id}/stronger")
    def stronger(relation_id: str, body: StrongerIn, s: Session = Depends(session)) -> dict:
        with store.lock:
            store.add_strength_edge(s.acting, relation_id, body.weaker)
            return {"relation": relation_doc(store.relation(relation_id)), "version": store.version}

    @app.post("/ties")
    def add_tie(body: TieIn, s: Session = Depends(session)) -> JSONResponse:
        if body.sender is not None and body.sender != s.acting_as:
            raise errors.NotOwner("sender must be the acting principal; use X-Acting-As")
        with store.lock:
            tie_id, _ = store.add_tie(s.acting, body.relation, body.receiver)
            return created({"tie": tie_doc(store.tie(tie_id)), "version": store.version})

    @app.post("/ties/{tie_id}/accept")
    def accept_tie(tie_id: str, body: AcceptIn, s: Session = Depends(session)) -> dict:
        with store.lock:
            reverse = store.accept_tie(s.acting, tie_id, body.reverse_relation)
            return {
                "tie": tie_doc(store.tie(tie_id)),
                "reverse": tie_doc(store.tie(reverse)),
                "version": store.version,
            }

    @app.post("/ties/{tie_id}/reject")
    def reject_tie(tie_id: str, s: Session = Depends(session)) -> dict:
        with store.lock:
            store.reject_tie(s.acting, tie_id)
            return {"removed": [tie_id], "version": store.version}

    @app.delete("/ties/{tie_id}")
    def remove_tie(tie_id: str, s: Session = Depends(session)) -> dict:
        with store.lock:
            paired = store.tie(tie_id).paired_with
            store.remove_tie(s.acting, tie_id)
            removed = [tie_id] + ([paired] if paired else [])
            return {"removed": removed, "version": store.version}

    @app.get("/ties/{tie_id}")
    def get_tie(tie_id: str, s: Session = Depends(session)) -> dict:
        with store.lock:
            return {"tie": tie_doc(store.tie(tie_id)), "version": store.version}

    @app.get("/actors/{actor_id}/contacts")
    def contacts(
        actor_id: str,
        relation: Optional[str] = None,
        page: int = Query(0, ge=0),
        s: Session = Depends(session),
    ) -> dict:
        with store.lock:
            pairs = store.contacts(actor_id, relation, acting=s.acting)
            return contacts_doc(pairs, store.version, page)

    @app.get("/check")
    def check(
        agent: str = Query(...),
        action: str = Query(...),
        object_class: str = Query(...),
        owner: str = Query(...),
        s: Session = Depends(session),
    ) -> dict:
        with store.lock:
            return decision_doc(authz.check(store, agent, action, object_class, owner), store.version)

    @app.get("/effective")
    def effective(owner: str = Query(...), agent: str = Query(...), s: Session = Depends(session)) -> dict:
        with store.lock:
            return effective_doc(authz.effective_permissions(store, owner, agent), store.version)

    return app


def serve(config: ServiceConfig, store: Optional[Store] = None) -> None:
    """Open the configured store directory and run the service until stopped."""
    import uvicorn

    from .store import close_store, open_store

    if store is None:
        if config.store is None:
            raise errors.InvalidInput("service config needs a store path")
        store = open_store(config.store)
    log.info("serving store at version %d on %s:%d", store.version, config.host, config.port)
    try:
        uvicorn.run(create_app(store, config), host=config.host, port=config.port, log_level="warning")
    finally:
        close_store(store)
