"""Authoritative in-memory social graph.

A :class:`Store` holds actors, the relations they own, the permissions
attached to those relations and the directed ties between actors. Every
mutation is validated first, turned into an :class:`EventRecord`, handed to
the optional journal (write-ahead) and only then applied. Replaying the same
records through :meth:`Store.apply_event` rebuilds an identical store.

All public methods take the store lock, so readers never observe a
half-applied mutation and the store can be shared between threads.
"""

from __future__ import annotations

import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, Iterator, Mapping, Optional, Protocol, Union

from . import errors
from .events import EventRecord

if TYPE_CHECKING:
    from .authz import ActingPair
    from .defaults import DefaultCatalog

BUILTIN_KINDS = ("user", "space", "event")
REPRESENT = "represent"
WILDCARD = "*"

_TOKEN = re.compile(r"[a-z][a-z0-9_\-]*\Z")
_KIND = re.compile(r"[a-z][a-z0-9_\-]*\Z")

ActorId = str
RelationId = str
TieId = str


def is_token(value: object) -> bool:
    return isinstance(value, str) and _TOKEN.match(value) is not None


@dataclass(frozen=True, order=True)
class Permission:
    """An ``(action, object_class)`` pair. ``object_class`` may be ``*``."""

    action: str
    object_class: str

    def __post_init__(self):
        if not is_token(self.action):
            raise errors.MalformedPermission(f"bad action {self.action!r}")
        if self.object_class != WILDCARD and not is_token(self.object_class):
            raise errors.MalformedPermission(f"bad object class {self.object_class!r}")
        if self.action == REPRESENT and self.object_class != WILDCARD:
            raise errors.MalformedPermission("represent must be granted on '*'")

    def matches(self, action: str, object_class: str) -> bool:
        return self.action == action and self.object_class in (object_class, WILDCARD)

    def __str__(self) -> str:
        return f"{self.action} {self.object_class}"


class TieState(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"


@dataclass(frozen=True)
class Actor:
    id: ActorId
    name: str
    kind: str


@dataclass(frozen=True)
class Relation:
    id: RelationId
    owner: ActorId
    name: str
    reciprocal: bool = False
    public_flag: bool = False
    permissions: frozenset[Permission] = frozenset()
    weaker: frozenset[RelationId] = frozenset()


@dataclass(frozen=True)
class Tie:
    id: TieId
    sender: ActorId
    relation: RelationId
    receiver: ActorId
    state: TieState
    paired_with: Optional[TieId] = None


class Journal(Protocol):
    def append(self, event: EventRecord) -> None: ...

    def append_many(self, events: list[EventRecord]) -> None: ...


Acting = Union["ActingPair", ActorId]

_PREFIX = {"actor": "a", "relation": "r", "tie": "t"}


def _id_number(value: object, prefix: str) -> int:
    if not isinstance(value, str) or not value.startswith(prefix) or not value[len(prefix):].isdigit():
        raise errors.InvariantViolation(f"malformed id {value!r}")
    return int(value[len(prefix):])


def _id_key(value: str) -> tuple[int, str]:
    digits = value[1:]
    return (int(digits), value) if digits.isdigit() else (-1, value)


@dataclass
class _Graph:
    actors: dict[ActorId, Actor] = field(default_factory=dict)
    relations: dict[RelationId, Relation] = field(default_factory=dict)
    ties: dict[TieId, Tie] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=lambda: {"a": 0, "r": 0, "t": 0})
    version: int = 0

    def copy(self) -> "_Graph":
        return _Graph(dict(self.actors), dict(self.relations), dict(self.ties), dict(self.counters), self.version)


class Store:
    """The Tie-RBAC graph plus its mutation surface.

    ``catalogs`` maps an actor kind to the default relations installed on
    every new actor of that kind; pass ``auto_defaults=False`` to keep new
    actors bare even when catalogs are configured.
    """

    def __init__(
        self,
        *,
        kinds: Optional[list[str]] = None,
        catalogs: Optional[Mapping[str, "DefaultCatalog"]] = None,
        auto_defaults: bool = True,
        journal: Optional[Journal] = None,
    ):
        extra = [k for k in (kinds or []) if k not in BUILTIN_KINDS]
        for k in extra:
            if not _KIND.match(k):
                raise errors.UnknownKind(f"invalid kind name {k!r}")
        self.kinds: tuple[str, ...] = BUILTIN_KINDS + tuple(dict.fromkeys(extra))
        self.catalogs = dict(catalogs or {})
        self.auto_defaults = auto_defaults
        self.journal = journal
        self._lock = threading.RLock()
        self._g = _Graph()
        self._pending: Optional[list[EventRecord]] = None
        self._reindex()

    # ------------------------------------------------------------------ reads

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    @property
    def version(self) -> int:
        return self._g.version

    def actor(self, actor_id: ActorId) -> Actor:
        with self._lock:
            try:
                return self._g.actors[actor_id]
            except (KeyError, TypeError):
                raise errors.UnknownActor(f"no actor {actor_id!r}") from None

    def relation(self, relation_id: RelationId) -> Relation:
        with self._lock:
            try:
                return self._g.relations[relation_id]
            except (KeyError, TypeError):
                raise errors.UnknownRelation(f"no relation {relation_id!r}") from None

    def tie(self, tie_id: TieId) -> Tie:
        with self._lock:
            try:
                return self._g.ties[tie_id]
            except (KeyError, TypeError):
                raise errors.UnknownTie(f"no tie {tie_id!r}") from None

    def actors(self) -> list[Actor]:
        with self._lock:
            return [self._g.actors[k] for k in sorted(self._g.actors, key=_id_key)]

    def find_actors(self, name: str) -> list[Actor]:
        return [a for a in self.actors() if a.name == name]

    def relations(self) -> list[Relation]:
        with self._lock:
            return [self._g.relations[k] for k in sorted(self._g.relations, key=_id_key)]

    def relations_of(self, owner: ActorId) -> list[Relation]:
        with self._lock:
            self.actor(owner)
            return [self._g.relations[r] for r in self._owned.get(owner, [])]

    def relation_named(self, owner: ActorId, name: str) -> Optional[Relation]:
        with self._lock:
            rid = self._names.get((owner, name))
            return self._g.relations[rid] if rid else None

    def ties(self) -> list[Tie]:
        with self._lock:
            return [self._g.ties[k] for k in sorted(self._g.ties, key=_id_key)]

    def ties_from(self, sender: ActorId) -> list[Tie]:
        with self._lock:
            return [self._g.ties[t] for t in sorted(self._sent.get(sender, ()), key=_id_key)]

    def ties_to(self, receiver: ActorId) -> list[Tie]:
        with self._lock:
            return [self._g.ties[t] for t in sorted(self._received.get(receiver, ()), key=_id_key)]

    def ties_between(self, sender: ActorId, receiver: ActorId) -> list[Tie]:
        with self._lock:
            return [t for t in self.ties_from(sender) if t.receiver == receiver]

    def live_tie(self, sender: ActorId, relation: RelationId, receiver: ActorId) -> Optional[Tie]:
        with self._lock:
            tid = self._tie_keys.get((sender, relation, receiver))
            return self._g.ties[tid] if tid else None

    def contacts(
        self,
        actor: ActorId,
        relation: Optional[RelationId] = None,
        *,
        acting: Optional[Acting] = None,
    ) -> set[tuple[ActorId, RelationId]]:
        """(receiver, relation) pairs of the accepted ties ``actor`` has sent."""
        with self._lock:
            self.actor(actor)
            if acting is not None and self._principal(acting) != actor:
                raise errors.NotOwner("contacts are visible to the actor and its representatives only")
            if relation is not None and self.relation(relation).owner != actor:
                raise errors.RelationNotOwned(f"{relation} is not owned by {actor}")
            return {
                (t.receiver, t.relation)
                for t in self.ties_from(actor)
                if t.state is TieState.ACCEPTED and (relation is None or t.relation == relation)
            }

    # -------------------------------------------------------------- mutations

    def create_actor(self, name: str, kind: str) -> ActorId:
        with self.batch():
            actor_id = f"a{self._g.counters['a'] + 1}"
            self._commit("actor-created", {"id": actor_id, "name": name, "kind": kind})
            catalog = self.catalogs.get(kind)
            if self.auto_defaults and catalog is not None:
                from .defaults import install_defaults

                install_defaults(self, actor_id, catalog)
            return actor_id

    def define_relation(
        self,
        owner: ActorId,
        name: str,
        reciprocal: bool = False,
        public_flag: bool = False,
        *,
        acting: Optional[Acting] = None,
    ) -> RelationId:
        with self._lock:
            self.actor(owner)
            if acting is not None and self._principal(acting) != owner:
                raise errors.NotOwner(f"only {owner} may define its relations")
            relation_id = f"r{self._g.counters['r'] + 1}"
            self._commit(
                "relation-defined",
                {
                    "id": relation_id,
                    "owner": owner,
                    "name": name,
                    "reciprocal": bool(reciprocal),
                    "public_flag": bool(public_flag),
                },
            )
            return relation_id

    def grant_permission(self, acting: Acting, relation: RelationId, permission: Permission) -> None:
        self._permission_change("permission-granted", acting, relation, permission)

    def revoke_permission(self, acting: Acting, relation: RelationId, permission: Permission) -> None:
        self._permission_change("permission-revoked", acting, relation, permission)

    def _permission_change(self, kind: str, acting: Acting, relation: RelationId, permission: Permission) -> None:
        with self._lock:
            rel = self.relation(relation)
            agent, principal = self._owner_check(acting, rel.owner)
            if not isinstance(permission, Permission):
                raise errors.MalformedPermission(f"not a permission: {permission!r}")
            present = permission in rel.permissions
            if present == (kind == "permission-granted"):
                return  # idempotent no-op, nothing logged
            self._commit(
                kind,
                {
                    "relation": relation,
                    "action": permission.action,
                    "object_class": permission.object_class,
                    "agent": agent,
                    "principal": principal,
                },
            )

    def add_strength_edge(self, acting: Acting, stronger: RelationId, weaker: RelationId) -> None:
        with self._lock:
            strong = self.relation(stronger)
            self.relation(weaker)
            agent, principal = self._owner_check(acting, strong.owner)
            if weaker in strong.weaker:
                return
            self._commit(
                "edge-added",
                {"stronger": stronger, "weaker": weaker, "agent": agent, "principal": principal},
            )

    def add_tie(self, acting: Acting, relation: RelationId, receiver: ActorId) -> tuple[TieId, TieState]:
        with self._lock:
            rel = self.relation(relation)
            agent, principal = self._owner_check(acting, rel.owner)
            self.actor(receiver)
            tie_id = f"t{self._g.counters['t'] + 1}"
            state = TieState.PENDING if rel.reciprocal else TieState.ACCEPTED
            self._commit(
                "tie-added",
                {
                    "id": tie_id,
                    "sender": principal,
                    "relation": relation,
                    "receiver": receiver,
                    "state": state.value,
                    "agent": agent,
                },
            )
            return tie_id, state

    def accept_tie(self, acting: Acting, tie: TieId, reverse_relation: RelationId) -> TieId:
        with self._lock:
            t = self.tie(tie)
            agent, principal = self._resolve(acting)
            if principal != t.receiver:
                raise errors.NotReceiver(f"{principal} is not the receiver of {tie}")
            self.relation(reverse_relation)
            reverse_id = f"t{self._g.counters['t'] + 1}"
            self._commit(
                "tie-accepted",
                {
                    "tie": tie,
                    "reverse_id": reverse_id,
                    "reverse_relation": reverse_relation,
                    "agent": agent,
                    "principal": principal,
                },
            )
            return reverse_id

    def reject_tie(self, acting: Acting, tie: TieId) -> None:
        with self._lock:
            t = self._g.ties.get(tie)
            if t is None:
                # an already removed tie is no longer pending
                if self._was_allocated(tie):
                    raise errors.NotPending(f"{tie} no longer exists")
                raise errors.UnknownTie(f"no tie {tie!r}")
            agent, principal = self._resolve(acting)
            if principal != t.receiver:
                raise errors.NotReceiver(f"{principal} is not the receiver of {tie}")
            self._commit("tie-rejected", {"tie": tie, "agent": agent, "principal": principal})

    def remove_tie(self, acting: Acting, tie: TieId) -> None:
        with self._lock:
            t = self.tie(tie)
            agent, principal = self._resolve(acting)
            if principal not in (t.sender, t.receiver):
                raise errors.NotParty(f"{principal} is neither sender nor receiver of {tie}")
            self._commit(
                "tie-removed",
                {"tie": tie, "paired": t.paired_with, "agent": agent, "principal": principal},
            )

    # ------------------------------------------------------- acting resolution

    def _resolve(self, acting: Acting) -> tuple[ActorId, ActorId]:
        from .authz import ActingPair, can_represent

        pair = acting if isinstance(acting, ActingPair) else ActingPair(acting, acting)
        self.actor(pair.agent)
        self.actor(pair.principal)
        if pair.agent != pair.principal and not can_represent(self, pair.agent, pair.principal):
            raise errors.RepresentationDenied(f"{pair.agent} cannot act as {pair.principal}")
        return pair.agent, pair.principal

    def _principal(self, acting: Acting) -> ActorId:
        return self._resolve(acting)[1]

    def _owner_check(self, acting: Acting, owner: ActorId) -> tuple[ActorId, ActorId]:
        agent, principal = self._resolve(acting)
        if principal != owner:
            raise errors.NotOwner(f"{principal} does not own this relation")
        return agent, principal

    # ------------------------------------------------------- commit machinery

    @contextmanager
    def batch(self) -> Iterator[None]:
        """Group mutations so they are journaled and applied all-or-nothing."""
        with self._lock:
            if self._pending is not None:
                yield
                return
            saved = self._g.copy()
            self._pending = []
            try:
                yield
                events, self._pending = self._pending, None
                if events and self.journal is not None:
                    self.journal.append_many(events)
            except BaseException:
                self._pending = None
                self._g = saved
                self._reindex()
                raise

    def _commit(self, kind: str, payload: dict[str, Any]) -> None:
        self._check(kind, payload)
        event = EventRecord(seq=self._g.version + 1, kind=kind, payload=payload)
        if self._pending is not None:
            self._pending.append(event)
        elif self.journal is not None:
            self.journal.append(event)
        self._apply(kind, payload)
        self._g.version = event.seq

    def apply_event(self, event: EventRecord) -> None:
        """Replay one record. Authorization is not re-checked; structure is."""
        with self._lock:
            if event.seq != self._g.version + 1:
                raise errors.SequenceGap(f"expected seq {self._g.version + 1}, got {event.seq}")
            try:
                self._check(event.kind, event.payload)
            except (KeyError, TypeError, ValueError) as exc:
                raise errors.InvariantViolation(f"malformed payload in seq {event.seq}: {exc!r}") from None
            self._apply(event.kind, event.payload)
            self._g.version = event.seq

    def _check(self, kind: str, p: dict[str, Any]) -> None:
        g = self._g
        if kind == "actor-created":
            if _id_number(p["id"], "a") <= g.counters["a"]:
                raise errors.InvariantViolation(f"actor id {p['id']} reused")
            if not isinstance(p["name"], str) or not p["name"].strip():
                raise errors.EmptyName("actor name must be non-empty")
            if p["kind"] not in self.kinds:
                raise errors.UnknownKind(f"unknown actor kind {p['kind']!r}")
        elif kind == "relation-defined":
            if _id_number(p["id"], "r") <= g.counters["r"]:
                raise errors.InvariantViolation(f"relation id {p['id']} reused")
            self.actor(p["owner"])
            if not isinstance(p["name"], str) or not p["name"]:
                raise errors.EmptyName("relation name must be non-empty")
            if (p["owner"], p["name"]) in self._names:
                raise errors.DuplicateName(f"{p['owner']} already owns a relation named {p['name']!r}")
            if p["reciprocal"] and p["public_flag"]:
                raise errors.PublicReciprocalConflict("a public relation cannot be reciprocal")
        elif kind in ("permission-granted", "permission-revoked"):
            self.relation(p["relation"])
            Permission(p["action"], p["object_class"])
        elif kind == "edge-added":
            strong, weak = self.relation(p["stronger"]), self.relation(p["weaker"])
            if strong.owner != weak.owner:
                raise errors.CrossOwnerEdge("strength edges must join relations of one owner")
            if strong.id in self._reachable(weak.id):
                raise errors.CycleDetected(f"{strong.id} > {weak.id} would close a cycle")
        elif kind == "tie-added":
            if _id_number(p["id"], "t") <= g.counters["t"]:
                raise errors.InvariantViolation(f"tie id {p['id']} reused")
            rel = self.relation(p["relation"])
            self.actor(p["sender"])
            self.actor(p["receiver"])
            if rel.owner != p["sender"]:
                raise errors.NotOwner(f"{p['sender']} does not own {rel.id}")
            if p["sender"] == p["receiver"]:
                raise errors.SelfTie("an actor cannot tie to itself")
            if rel.public_flag:
                raise errors.TieToPublicRelation(f"{rel.id} is public and accepts no ties")
            if (p["sender"], p["relation"], p["receiver"]) in self._tie_keys:
                raise errors.DuplicateTie("an identical tie already exists")
            expected = TieState.PENDING if rel.reciprocal else TieState.ACCEPTED
            if p["state"] != expected.value:
                raise errors.InvariantViolation(f"tie on {rel.id} must start {expected.value}")
        elif kind == "tie-accepted":
            t = self.tie(p["tie"])
            if t.state is not TieState.PENDING:
                raise errors.NotPending(f"{t.id} is {t.state.value}")
            if _id_number(p["reverse_id"], "t") <= g.counters["t"]:
                raise errors.InvariantViolation(f"tie id {p['reverse_id']} reused")
            rev = self.relation(p["reverse_relation"])
            if rev.owner != t.receiver:
                raise errors.ReverseRelationNotOwned(f"{rev.id} is not owned by {t.receiver}")
            if not rev.reciprocal:
                raise errors.ReverseRelationNotReciprocal(f"{rev.id} is not reciprocal")
            if (t.receiver, rev.id, t.sender) in self._tie_keys:
                raise errors.DuplicateTie("the reverse tie already exists")
        elif kind == "tie-rejected":
            t = self.tie(p["tie"])
            if t.state is not TieState.PENDING:
                raise errors.NotPending(f"{t.id} is {t.state.value}")
        elif kind == "tie-removed":
            t = self.tie(p["tie"])
            if p.get("paired") != t.paired_with:
                raise errors.InvariantViolation(f"pairing of {t.id} does not match the record")
        else:
            raise errors.InvariantViolation(f"unknown event kind {kind!r}")

    def _apply(self, kind: str, p: dict[str, Any]) -> None:
        g = self._g
        if kind == "actor-created":
            g.actors[p["id"]] = Actor(p["id"], p["name"], p["kind"])
            g.counters["a"] = _id_number(p["id"], "a")
        elif kind == "relation-defined":
            rel = Relation(p["id"], p["owner"], p["name"], p["reciprocal"], p["public_flag"])
            g.relations[rel.id] = rel
            g.counters["r"] = _id_number(rel.id, "r")
            self._names[(rel.owner, rel.name)] = rel.id
            self._owned.setdefault(rel.owner, []).append(rel.id)
        elif kind in ("permission-granted", "permission-revoked"):
            rel = g.relations[p["relation"]]
            perm = Permission(p["action"], p["object_class"])
            perms = rel.permissions | {perm} if kind == "permission-granted" else rel.permissions - {perm}
            g.relations[rel.id] = replace(rel, permissions=frozenset(perms))
        elif kind == "edge-added":
            rel = g.relations[p["stronger"]]
            g.relations[rel.id] = replace(rel, weaker=rel.weaker | {p["weaker"]})
        elif kind == "tie-added":
            self._put_tie(Tie(p["id"], p["sender"], p["relation"], p["receiver"], TieState(p["state"])))
            g.counters["t"] = _id_number(p["id"], "t")
        elif kind == "tie-accepted":
            t = g.ties[p["tie"]]
            rev = Tie(p["reverse_id"], t.receiver, p["reverse_relation"], t.sender, TieState.ACCEPTED, t.id)
            self._put_tie(replace(t, state=TieState.ACCEPTED, paired_with=rev.id))
            self._put_tie(rev)
            g.counters["t"] = _id_number(rev.id, "t")
        elif kind == "tie-rejected":
            self._drop_tie(p["tie"])
        elif kind == "tie-removed":
            paired = g.ties[p["tie"]].paired_with
            self._drop_tie(p["tie"])
            if paired is not None:
                self._drop_tie(paired)

    def _put_tie(self, tie: Tie) -> None:
        self._g.ties[tie.id] = tie
        self._tie_keys[(tie.sender, tie.relation, tie.receiver)] = tie.id
        self._sent.setdefault(tie.sender, set()).add(tie.id)
        self._received.setdefault(tie.receiver, set()).add(tie.id)

    def _drop_tie(self, tie_id: TieId) -> None:
        tie = self._g.ties.pop(tie_id)
        del self._tie_keys[(tie.sender, tie.relation, tie.receiver)]
        self._sent[tie.sender].discard(tie_id)
        self._received[tie.receiver].discard(tie_id)

    def _was_allocated(self, tie_id: object) -> bool:
        try:
            return 0 < _id_number(tie_id, "t") <= self._g.counters["t"]
        except errors.InvariantViolation:
            return False

    def _reachable(self, start: RelationId) -> set[RelationId]:
        seen = {start}
        stack = [start]
        while stack:
            for nxt in self._g.relations[stack.pop()].weaker:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def _reindex(self) -> None:
        self._names: dict[tuple[ActorId, str], RelationId] = {}
        self._owned: dict[ActorId, list[RelationId]] = {}
        self._tie_keys: dict[tuple[ActorId, RelationId, ActorId], TieId] = {}
        self._sent: dict[ActorId, set[TieId]] = {}
        self._received: dict[ActorId, set[TieId]] = {}
        for rid in sorted(self._g.relations, key=_id_key):
            rel = self._g.relations[rid]
            self._names[(rel.owner, rel.name)] = rid
            self._owned.setdefault(rel.owner, []).append(rid)
        for tie in list(self._g.ties.values()):
            self._put_tie(tie)

    # ------------------------------------------------------------ inspection

    def state_dict(self) -> dict[str, Any]:
        """Canonical, JSON-ready view of the whole graph."""
        with self._lock:
            g = self._g
            return {
                "version": g.version,
                "kinds": list(self.kinds),
                "counters": {name: g.counters[p] for name, p in _PREFIX.items()},
                "actors": [{"id": a.id, "name": a.name, "kind": a.kind} for a in self.actors()],
                "relations": [
                    {
                        "id": r.id,
                        "owner": r.owner,
                        "name": r.name,
                        "reciprocal": r.reciprocal,
                        "public_flag": r.public_flag,
                        "permissions": [[p.action, p.object_class] for p in sorted(r.permissions)],
                        "weaker": sorted(r.weaker, key=_id_key),
                    }
                    for r in self.relations()
                ],
                "ties": [
                    {
                        "id": t.id,
                        "sender": t.sender,
                        "relation": t.relation,
                        "receiver": t.receiver,
                        "state": t.state.value,
                        "paired_with": t.paired_with,
                    }
                    for t in self.ties()
                ],
            }

    @classmethod
    def from_state_dict(cls, data: Mapping[str, Any], **kwargs: Any) -> "Store":
        """Rebuild a store from :meth:`state_dict` output and verify it."""
        try:
            store = cls(kinds=list(data["kinds"]), **kwargs)
            g = store._g
            for a in data["actors"]:
                g.actors[a["id"]] = Actor(a["id"], a["name"], a["kind"])
            for r in data["relations"]:
                perms = frozenset(Permission(act, cls_) for act, cls_ in r["permissions"])
                if len(perms) != len(r["permissions"]):
                    raise errors.InvariantViolation(f"duplicate permissions on {r['id']}")
                g.relations[r["id"]] = Relation(
                    r["id"], r["owner"], r["name"], bool(r["reciprocal"]), bool(r["public_flag"]),
                    perms, frozenset(r["weaker"]),
                )
            for t in data["ties"]:
                g.ties[t["id"]] = Tie(
                    t["id"], t["sender"], t["relation"], t["receiver"], TieState(t["state"]), t["paired_with"]
                )
            counters = data["counters"]
            g.counters = {p: int(counters[name]) for name, p in _PREFIX.items()}
            g.version = int(data["version"])
            if (
                len(g.actors) != len(data["actors"])
                or len(g.relations) != len(data["relations"])
                or len(g.ties) != len(data["ties"])
            ):
                raise errors.InvariantViolation("duplicate ids")
        except errors.TierbacError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise errors.InvariantViolation(f"malformed state: {exc!r}") from None
        store._reindex()
        store.verify()
        return store

    def verify(self) -> None:
        """Full scan of every structural invariant; raises InvariantViolation."""
        with self._lock:
            g = self._g

            def fail(msg: str) -> None:
                raise errors.InvariantViolation(msg)

            for key, prefix in (("actors", "a"), ("relations", "r"), ("ties", "t")):
                for oid in getattr(g, key):
                    if _id_number(oid, prefix) > g.counters[prefix]:
                        fail(f"id {oid} beyond allocation counter")
            for a in g.actors.values():
                if not a.name.strip():
                    fail(f"actor {a.id} has an empty name")
                if a.kind not in self.kinds:
                    fail(f"actor {a.id} has unknown kind {a.kind!r}")
            names: set[tuple[str, str]] = set()
            for r in g.relations.values():
                if r.owner not in g.actors:
                    fail(f"relation {r.id} has unknown owner")
                if not r.name:
                    fail(f"relation {r.id} has an empty name")
                if (r.owner, r.name) in names:
                    fail(f"duplicate relation name {r.name!r} for {r.owner}")
                names.add((r.owner, r.name))
                if r.reciprocal and r.public_flag:
                    fail(f"relation {r.id} is both public and reciprocal")
                for w in r.weaker:
                    if w not in g.relations or g.relations[w].owner != r.owner:
                        fail(f"relation {r.id} has a foreign or unknown weaker edge {w}")
            for r in g.relations.values():
                if any(r.id in self._reachable(w) for w in r.weaker):
                    fail(f"strength cycle through {r.id}")
            keys: set[tuple[str, str, str]] = set()
            for t in g.ties.values():
                rel = g.relations.get(t.relation)
                if rel is None or t.sender not in g.actors or t.receiver not in g.actors:
                    fail(f"tie {t.id} references unknown ids")
                if rel.owner != t.sender:
                    fail(f"tie {t.id} uses a relation not owned by its sender")
                if t.sender == t.receiver:
                    fail(f"tie {t.id} is a self-tie")
                if rel.public_flag:
                    fail(f"tie {t.id} references public relation {rel.id}")
                key = (t.sender, t.relation, t.receiver)
                if key in keys:
                    fail(f"duplicate tie {key}")
                keys.add(key)
                if t.state is TieState.PENDING:
                    if not rel.reciprocal or t.paired_with is not None:
                        fail(f"pending tie {t.id} must be reciprocal and unpaired")
                elif rel.reciprocal:
                    other = g.ties.get(t.paired_with) if t.paired_with else None
                    if (
                        other is None
                        or other.state is not TieState.ACCEPTED
                        or other.paired_with != t.id
                        or (other.sender, other.receiver) != (t.receiver, t.sender)
                        or not g.relations[other.relation].reciprocal
                    ):
                        fail(f"accepted reciprocal tie {t.id} is not properly paired")
                elif t.paired_with is not None:
                    fail(f"non-reciprocal tie {t.id} carries a pairing")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Store):
            return NotImplemented
        return self.state_dict() == other.state_dict()

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        g = self._g
        return f"<Store v{g.version}: {len(g.actors)} actors, {len(g.relations)} relations, {len(g.ties)} ties>"
