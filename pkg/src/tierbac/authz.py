"""Authorization queries over a :class:`~tierbac.model.Store`.

Nothing here mutates or caches: every answer is recomputed from the graph
under the store lock, so a query sees one consistent version and a removed
tie stops conveying permissions immediately.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import errors
from .model import REPRESENT, WILDCARD, ActorId, Permission, RelationId, Store, TieState, is_token


@dataclass(frozen=True)
class ActingPair:
    """``agent`` is the authenticated caller, ``principal`` who it acts as."""

    agent: ActorId
    principal: ActorId

    @classmethod
    def self(cls, actor: ActorId) -> "ActingPair":
        return cls(actor, actor)


class Reason(str, Enum):
    SELF_OWNER = "self-owner"
    DIRECT_TIE = "direct-tie"
    VIA_REPRESENTATION = "via-representation"
    PUBLIC_GRANT = "public-grant"
    DENIED = "denied"


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: Reason

    def to_dict(self) -> dict:
        return {"allowed": self.allowed, "reason": self.reason.value}


DENIED = Decision(False, Reason.DENIED)


def weaker_closure(store: Store, relation: RelationId) -> frozenset[RelationId]:
    """``relation`` plus everything reachable along its weaker edges."""
    with store.lock:
        seen = {store.relation(relation).id}
        frontier = [relation]
        while frontier:
            for nxt in store.relation(frontier.pop()).weaker:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return frozenset(seen)


def closure_permissions(store: Store, relation: RelationId) -> frozenset[Permission]:
    with store.lock:
        perms: set[Permission] = set()
        for rid in weaker_closure(store, relation):
            perms |= store.relation(rid).permissions
        return frozenset(perms)


def _tie_and_public(store: Store, owner: ActorId, agent: ActorId) -> tuple[frozenset[Permission], frozenset[Permission]]:
    store.actor(owner)
    store.actor(agent)
    via_ties: set[Permission] = set()
    for tie in store.ties_between(owner, agent):
        if tie.state is TieState.ACCEPTED:
            via_ties |= closure_permissions(store, tie.relation)
    public: set[Permission] = set()
    for rel in store.relations_of(owner):
        if rel.public_flag:
            public |= closure_permissions(store, rel.id)
    return frozenset(via_ties), frozenset(public)


def effective_permissions(store: Store, owner: ActorId, agent: ActorId) -> frozenset[Permission]:
    """What ``agent`` may do on ``owner``'s objects, from ties and public grants."""
    with store.lock:
        via_ties, public = _tie_and_public(store, owner, agent)
        return via_ties | public


def _grants(perms: frozenset[Permission], action: str, object_class: str) -> bool:
    return any(p.matches(action, object_class) for p in perms)


def can_represent(store: Store, agent: ActorId, principal: ActorId) -> bool:
    """Single hop only: a representative of a representative gets nothing."""
    with store.lock:
        if agent == principal:
            store.actor(agent)
            return True
        return _grants(effective_permissions(store, principal, agent), REPRESENT, WILDCARD)


def represented_by(store: Store, agent: ActorId) -> list[ActorId]:
    """Every principal other than ``agent`` that ``agent`` may act as."""
    with store.lock:
        store.actor(agent)
        candidates = {t.sender for t in store.ties_to(agent) if t.state is TieState.ACCEPTED}
        candidates |= {r.owner for r in store.relations() if r.public_flag}
        candidates.discard(agent)
        return sorted(p for p in candidates if can_represent(store, agent, p))


def _direct(store: Store, agent: ActorId, action: str, object_class: str, owner: ActorId) -> Decision:
    if agent == owner:
        return Decision(True, Reason.SELF_OWNER)
    via_ties, public = _tie_and_public(store, owner, agent)
    if _grants(via_ties, action, object_class):
        return Decision(True, Reason.DIRECT_TIE)
    if _grants(public, action, object_class):
        return Decision(True, Reason.PUBLIC_GRANT)
    return DENIED


def check(store: Store, agent: ActorId, action: str, object_class: str, owner: ActorId) -> Decision:
    """Decide whether ``agent`` may perform ``action`` on ``owner``'s ``object_class``.

    Reasons are tried in priority order: the owner itself, a permission
    conveyed by the owner's ties or public relations, then the same test
    performed by any principal the agent can represent (including the owner
    itself when the agent represents the owner).
    """
    if not is_token(action):
        raise errors.MalformedToken(f"bad action {action!r}")
    if object_class != WILDCARD and not is_token(object_class):
        raise errors.MalformedToken(f"bad object class {object_class!r}")
    with store.lock:
        store.actor(agent)
        store.actor(owner)
        first = _direct(store, agent, action, object_class, owner)
        if first.allowed:
            return first
        for principal in represented_by(store, agent):
            if _direct(store, principal, action, object_class, owner).allowed:
                return Decision(True, Reason.VIA_REPRESENTATION)
        return DENIED
