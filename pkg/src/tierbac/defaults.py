"""Default relation catalogs installed per actor kind.

The shipped catalogs cover the three built-in kinds. Names follow the
reference deployment; reciprocity, permissions and strength ordering are
configuration and may be replaced with a catalog file::

    defaults user
    relation user.friend reciprocal
    grant user.friend read wall
    stronger user.friend > user.acquaintance
    relation user.acquaintance

Inside a ``defaults <kind>`` block the owner part of every reference is the
kind name itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from . import errors
from .model import ActorId, Permission, RelationId, Store


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    reciprocal: bool = False
    public_flag: bool = False
    permissions: frozenset[Permission] = frozenset()
    weaker_names: tuple[str, ...] = ()


@dataclass(frozen=True)
class DefaultCatalog:
    kind: str
    entries: tuple[CatalogEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise errors.DuplicateName(f"duplicate entry names in the {self.kind} catalog")
        edges = {e.name: set(e.weaker_names) for e in self.entries}
        for e in self.entries:
            if e.reciprocal and e.public_flag:
                raise errors.PublicReciprocalConflict(f"{self.kind}.{e.name} is public and reciprocal")
            unknown = edges[e.name] - set(names)
            if unknown:
                raise errors.UnknownRelation(f"{self.kind}.{e.name} names unknown weaker {sorted(unknown)}")
        # Kahn's algorithm; leftovers sit on a cycle
        indegree = {n: 0 for n in names}
        for targets in edges.values():
            for t in targets:
                indegree[t] += 1
        ready = [n for n, d in indegree.items() if d == 0]
        done = 0
        while ready:
            n = ready.pop()
            done += 1
            for t in edges[n]:
                indegree[t] -= 1
                if indegree[t] == 0:
                    ready.append(t)
        if done != len(names):
            raise errors.CycleDetected(f"strength cycle in the {self.kind} catalog")

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]


def _entry(name, perms=(), weaker=(), reciprocal=False, public=False) -> CatalogEntry:
    return CatalogEntry(
        name,
        reciprocal=reciprocal,
        public_flag=public,
        permissions=frozenset(Permission(a, c) for a, c in perms),
        weaker_names=tuple(weaker),
    )


def builtin_catalogs() -> dict[str, DefaultCatalog]:
    return {
        "user": DefaultCatalog(
            "user",
            (
                _entry("friend", [("read", "wall"), ("post", "wall")], ["acquaintance"], reciprocal=True),
                _entry("acquaintance", [("read", "profile")], ["public"]),
                _entry("public", public=True),
            ),
        ),
        "space": DefaultCatalog(
            "space",
            (
                _entry("administrator", [("represent", "*")], ["member"]),
                _entry("member", [("post", "wall")], ["follower"]),
                _entry("follower", [("read", "wall")], ["public"]),
                _entry("partner", [("read", "wall")]),
                _entry("public", public=True),
            ),
        ),
        "event": DefaultCatalog(
            "event",
            (
                _entry("organizer", [("represent", "*")], ["participant"]),
                _entry("participant", [("post", "agenda")], ["audience"]),
                _entry("audience", [("read", "agenda")]),
            ),
        ),
    }


def install_defaults(store: Store, actor: ActorId, catalog: DefaultCatalog) -> list[RelationId]:
    """Create every catalog relation on ``actor`` in one atomic batch."""
    with store.batch():
        owner = store.actor(actor)
        if owner.kind != catalog.kind:
            raise errors.KindMismatch(f"{catalog.kind} catalog cannot be installed on a {owner.kind}")
        taken = [e.name for e in catalog.entries if store.relation_named(actor, e.name) is not None]
        if taken:
            raise errors.NameCollision(f"{actor} already owns {', '.join(taken)}")
        ids = {e.name: store.define_relation(actor, e.name, e.reciprocal, e.public_flag) for e in catalog.entries}
        for e in catalog.entries:
            for perm in sorted(e.permissions):
                store.grant_permission(actor, ids[e.name], perm)
        for e in catalog.entries:
            for weaker in e.weaker_names:
                store.add_strength_edge(actor, ids[e.name], ids[weaker])
        return [ids[e.name] for e in catalog.entries]


def parse_catalogs(source: str) -> dict[str, DefaultCatalog]:
    """Read ``defaults <kind>`` blocks; each must hold relation/grant/stronger lines."""
    from . import dsl

    statements = dsl.parse(source, catalog=True)
    blocks: dict[str, dict[str, dict]] = {}
    current: Union[str, None] = None

    def entry(stmt, owner: str, name: str) -> dict:
        if current is None:
            raise errors.InvalidInput(f"line {stmt.line}: statement outside a defaults block")
        if owner != current:
            raise errors.InvalidInput(f"line {stmt.line}: owner {owner!r} must be the block kind {current!r}")
        try:
            return blocks[current][name]
        except KeyError:
            raise errors.InvalidInput(f"line {stmt.line}: relation {name!r} is not declared") from None

    for stmt in statements:
        if isinstance(stmt, dsl.DefaultsBlock):
            if stmt.kind in blocks:
                raise errors.InvalidInput(f"line {stmt.line}: second defaults block for {stmt.kind!r}")
            current = stmt.kind
            blocks[current] = {}
        elif isinstance(stmt, dsl.RelationDecl):
            if current is None or stmt.owner != current:
                raise errors.InvalidInput(f"line {stmt.line}: relation must be declared as {current}.<name>")
            if stmt.name in blocks[current]:
                raise errors.InvalidInput(f"line {stmt.line}: duplicate relation {stmt.name!r}")
            blocks[current][stmt.name] = {
                "reciprocal": stmt.reciprocal,
                "public_flag": stmt.public,
                "permissions": set(),
                "weaker": [],
            }
        elif isinstance(stmt, dsl.Grant):
            try:
                perm = Permission(stmt.action, stmt.object_class)
            except errors.MalformedPermission as exc:
                raise errors.InvalidInput(f"line {stmt.line}: {exc.detail}") from None
            entry(stmt, stmt.owner, stmt.relation)["permissions"].add(perm)
        elif isinstance(stmt, dsl.Stronger):
            entry(stmt, stmt.weaker_owner, stmt.weaker)
            entry(stmt, stmt.owner, stmt.stronger)["weaker"].append(stmt.weaker)
        else:
            raise errors.InvalidInput(f"line {stmt.line}: only relation, grant and stronger belong in a catalog")

    return {
        kind: DefaultCatalog(
            kind,
            tuple(
                CatalogEntry(name, e["reciprocal"], e["public_flag"], frozenset(e["permissions"]), tuple(e["weaker"]))
                for name, e in entries.items()
            ),
        )
        for kind, entries in blocks.items()
    }


def load_catalogs(path: Union[str, Path]) -> dict[str, DefaultCatalog]:
    return parse_catalogs(Path(path).read_text(encoding="utf-8"))
