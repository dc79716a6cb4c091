"""``tierbac`` operator tool.

Works against a local store directory (``--store`` or ``TIERBAC_STORE``) or
a running service (``--remote``/``TIERBAC_REMOTE`` plus ``--token``/
``TIERBAC_TOKEN``). Exit codes: 0 success (a denial is a successful answer),
1 operational error, 2 usage error, 3 ``apply`` finished with failing checks.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import api, authz, dsl, errors
from .defaults import builtin_catalogs, install_defaults, load_catalogs
from .model import Store, is_token
from .store import close_store, init_store, open_store, read_config, write_snapshot

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_CHECKS = 0, 1, 2, 3

REMOTE_ONLY_OK = {"check", "contacts", "effective"}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tierbac", description=__doc__.splitlines()[0])
    parser.add_argument("--store", default=os.environ.get("TIERBAC_STORE"), help="local store directory")
    parser.add_argument("--remote", default=os.environ.get("TIERBAC_REMOTE"), help="service base URL")
    parser.add_argument("--token", default=os.environ.get("TIERBAC_TOKEN"), help="bearer token for --remote")
    parser.add_argument("--machine", action="store_true", help="emit one JSON document on stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create an empty store directory")
    p.add_argument("--defaults", default="none", help="'none', 'builtin' or a catalog file")
    p.add_argument("--kind", action="append", default=[], help="extra actor kind (repeatable)")

    p = sub.add_parser("apply", help="run a .trbac scenario file")
    p.add_argument("file")
    p.add_argument(
        "--defaults",
        default="none",
        help="catalogs for the throwaway store used when no --store is given",
    )

    p = sub.add_parser("check", help="decide agent ACTION CLASS on owner")
    for name in ("agent", "action", "object_class", "owner"):
        p.add_argument(name)

    p = sub.add_parser("contacts", help="list an actor's accepted outgoing ties")
    p.add_argument("actor")
    p.add_argument("--relation")

    p = sub.add_parser("effective", help="permissions AGENT holds on OWNER's objects")
    p.add_argument("owner")
    p.add_argument("agent")

    p = sub.add_parser("defaults", help="default relation catalogs")
    dsub = p.add_subparsers(dest="defaults_command", required=True)
    d = dsub.add_parser("install", help="install the catalog for the actor's kind")
    d.add_argument("actor")
    d.add_argument("--catalog", help="catalog file overriding the store configuration")

    sub.add_parser("snapshot", help="write state.snapshot into the store directory")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="service config file (JSON)")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    return parser


# ---------------------------------------------------------------- backends


class _Local:
    def __init__(self, store: Store):
        self.store = store

    def actor(self, ref: str) -> Optional[str]:
        try:
            return self.store.actor(ref).id
        except errors.UnknownActor:
            pass
        found = self.store.find_actors(ref)
        if len(found) > 1:
            raise UsageError(f"actor name {ref!r} is ambiguous; use its id")
        return found[0].id if found else None

    def relation(self, owner: str, ref: str) -> str:
        rel = self.store.relation_named(owner, ref)
        return rel.id if rel else ref

    def check(self, agent: str, action: str, object_class: str, owner: str) -> dict:
        with self.store.lock:
            d = authz.check(self.store, agent, action, object_class, owner)
            return api.decision_doc(d, self.store.version)

    def version(self) -> int:
        return self.store.version

    def contacts(self, actor: str, relation: Optional[str]) -> dict:
        with self.store.lock:
            return api.contacts_doc(self.store.contacts(actor, relation), self.store.version)

    def effective(self, owner: str, agent: str) -> dict:
        with self.store.lock:
            return api.effective_doc(authz.effective_permissions(self.store, owner, agent), self.store.version)


class _RemoteError(errors.TierbacError):
    def __init__(self, status: int, tag: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.tag = tag


class _Remote:
    def __init__(self, base_url: str, token: Optional[str]):
        import httpx

        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self.client = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=30.0)

    def _get(self, path: str, **params: Any) -> dict:
        resp = self.client.get(path, params={k: v for k, v in params.items() if v is not None})
        body = resp.json()
        if resp.status_code >= 400:
            raise _RemoteError(resp.status_code, body.get("error", "error"), body.get("detail", ""))
        return body

    def actor(self, ref: str) -> Optional[str]:
        try:
            return self._get(f"/actors/{ref}")["actor"]["id"]
        except _RemoteError as exc:
            if exc.status != 404:
                raise
        found = self._get("/actors", name=ref)["actors"]
        if len(found) > 1:
            raise UsageError(f"actor name {ref!r} is ambiguous; use its id")
        return found[0]["id"] if found else None

    def relation(self, owner: str, ref: str) -> str:
        for rel in self._get(f"/actors/{owner}/relations")["relations"]:
            if rel["name"] == ref:
                return rel["id"]
        return ref

    def version(self) -> int:
        return self._get("/healthz")["version"]

    def check(self, agent: str, action: str, object_class: str, owner: str) -> dict:
        return self._get("/check", agent=agent, action=action, object_class=object_class, owner=owner)

    def contacts(self, actor: str, relation: Optional[str]) -> dict:
        return self._get(f"/actors/{actor}/contacts", relation=relation)

    def effective(self, owner: str, agent: str) -> dict:
        return self._get("/effective", owner=owner, agent=agent)


# ---------------------------------------------------------------- commands


class _Out:
    def __init__(self, machine: bool):
        self.machine = machine

    def emit(self, doc: dict, human: str) -> None:
        if self.machine:
            print(json.dumps(doc, sort_keys=True))
        else:
            print(human)


def _need_store(args: argparse.Namespace) -> Path:
    if not args.store:
        raise UsageError(f"{args.command} needs --store (or TIERBAC_STORE)")
    return Path(args.store)


def _cmd_init(args: argparse.Namespace, out: _Out) -> int:
    root = init_store(_need_store(args), defaults=args.defaults, kinds=args.kind)
    out.emit({"store": str(root), "defaults": args.defaults, "version": 0}, f"initialized {root}")
    return EXIT_OK


def _cmd_apply(args: argparse.Namespace, out: _Out) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    statements = dsl.parse(source)
    if args.store:
        store = open_store(args.store)
    else:
        catalogs = {} if args.defaults == "none" else (
            builtin_catalogs() if args.defaults == "builtin" else load_catalogs(args.defaults)
        )
        store = Store(catalogs=catalogs)
    try:
        report = dsl.elaborate(statements, store)
    finally:
        close_store(store)
    failures = "".join(
        f"\n  line {c.line}: {dsl.format_statement(c.statement)} (got {c.decision.reason.value})"
        for c in report.checks
        if not c.passed
    )
    doc = dict(report.to_dict(), version=store.version)
    out.emit(doc, report.summary() + failures)
    return EXIT_OK if report.ok else EXIT_CHECKS


def _backend(args: argparse.Namespace):
    if args.remote and not args.store:
        return _Remote(args.remote, args.token)
    return _Local(open_store(_need_store(args)))


def _cmd_check(args: argparse.Namespace, out: _Out, backend) -> int:
    agent, owner = backend.actor(args.agent), backend.actor(args.owner)
    if agent is None or owner is None:
        # nothing can be granted to or by an actor that does not exist
        if not is_token(args.action):
            raise errors.MalformedToken(f"bad action {args.action!r}")
        if args.object_class != "*" and not is_token(args.object_class):
            raise errors.MalformedToken(f"bad object class {args.object_class!r}")
        doc = api.decision_doc(authz.DENIED, backend.version())
    else:
        doc = backend.check(agent, args.action, args.object_class, owner)
    human = f"allowed ({doc['reason']})" if doc["allowed"] else "denied"
    out.emit(doc, human)
    return EXIT_OK


def _resolve(backend, ref: str) -> str:
    actor = backend.actor(ref)
    if actor is None:
        raise errors.UnknownActor(f"no actor {ref!r}")
    return actor


def _cmd_contacts(args: argparse.Namespace, out: _Out, backend) -> int:
    actor = _resolve(backend, args.actor)
    relation = backend.relation(actor, args.relation) if args.relation else None
    doc = backend.contacts(actor, relation)
    lines = [f"{c['actor']}\t{c['relation']}" for c in doc["contacts"]]
    out.emit(doc, "\n".join(lines) if lines else "no contacts")
    return EXIT_OK


def _cmd_effective(args: argparse.Namespace, out: _Out, backend) -> int:
    doc = backend.effective(_resolve(backend, args.owner), _resolve(backend, args.agent))
    lines = [f"{p['action']} {p['object_class']}" for p in doc["permissions"]]
    out.emit(doc, "\n".join(lines) if lines else "no permissions")
    return EXIT_OK


def _cmd_defaults(args: argparse.Namespace, out: _Out) -> int:
    root = _need_store(args)
    store = open_store(root)
    try:
        actor = _Local(store).actor(args.actor)
        if actor is None:
            raise errors.UnknownActor(f"no actor {args.actor!r}")
        if args.catalog:
            catalogs = load_catalogs(args.catalog)
        else:
            catalogs = read_config(root).catalogs(root) or builtin_catalogs()
        kind = store.actor(actor).kind
        if kind not in catalogs:
            raise errors.KindMismatch(f"no catalog for kind {kind!r}")
        ids = install_defaults(store, actor, catalogs[kind])
        doc = {"actor": actor, "relations": [api.relation_doc(store.relation(r)) for r in ids], "version": store.version}
    finally:
        close_store(store)
    out.emit(doc, f"installed {len(ids)} relations on {actor}")
    return EXIT_OK


def _cmd_snapshot(args: argparse.Namespace, out: _Out) -> int:
    root = _need_store(args)
    store = open_store(root)
    try:
        meta = write_snapshot(store, root)
    finally:
        close_store(store)
    doc = {"last_seq": meta.last_seq, "actors": meta.actors, "relations": meta.relations, "ties": meta.ties}
    out.emit(doc, f"snapshot at seq {meta.last_seq}: {meta.actors} actors, {meta.relations} relations, {meta.ties} ties")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace, out: _Out) -> int:
    config = api.ServiceConfig.from_file(args.config) if args.config else api.ServiceConfig()
    if args.store:
        config.store = args.store
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    if config.store is None:
        raise UsageError("serve needs --store or a config file naming the store")
    api.serve(config)
    return EXIT_OK


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = _Out(args.machine)
    try:
        if args.remote and not args.store and args.command not in REMOTE_ONLY_OK:
            raise UsageError(f"{args.command} is only available against a local --store")
        if args.command in REMOTE_ONLY_OK:
            backend = _backend(args)
            try:
                handler = {"check": _cmd_check, "contacts": _cmd_contacts, "effective": _cmd_effective}
                return handler[args.command](args, out, backend)
            finally:
                if isinstance(backend, _Local):
                    close_store(backend.store)
        handler = {
            "init": _cmd_init,
            "apply": _cmd_apply,
            "defaults": _cmd_defaults,
            "snapshot": _cmd_snapshot,
            "serve": _cmd_serve,
        }
        return handler[args.command](args, out)
    except UsageError as exc:
        print(f"tierbac: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.TierbacError, OSError) as exc:
        tag = getattr(exc, "tag", "io-error")
        detail = getattr(exc, "detail", str(exc))
        if args.machine:
            doc = {"error": tag, "detail": detail}
            if isinstance(exc, (dsl.DslSyntaxError, dsl.ElaborationError)):
                doc["line"] = exc.line
            print(json.dumps(doc, sort_keys=True))
        print(f"tierbac: {tag}: {detail}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
