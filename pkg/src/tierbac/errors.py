"""Exception hierarchy.

Every error carries a short ``tag`` used on the wire and in CLI output. The
intermediate classes group errors by how a caller should react; the api
module maps each group onto an HTTP status.
"""

from __future__ import annotations


class TierbacError(Exception):
    tag = "error"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.tag)
        self.detail = detail or self.tag


class InvalidInput(TierbacError):
    tag = "malformed"


class NotFound(TierbacError):
    tag = "not-found"


class Forbidden(TierbacError):
    tag = "forbidden"


class Conflict(TierbacError):
    tag = "conflict"


class InvariantError(TierbacError):
    tag = "invariant-violation"


# malformed input
class EmptyName(InvalidInput):
    tag = "empty-name"


class UnknownKind(InvalidInput):
    tag = "unknown-kind"


class MalformedPermission(InvalidInput):
    tag = "malformed-permission"


class MalformedToken(InvalidInput):
    tag = "malformed-token"


# unknown ids
class UnknownActor(NotFound):
    tag = "unknown-actor"


class UnknownRelation(NotFound):
    tag = "unknown-relation"


class UnknownTie(NotFound):
    tag = "unknown-tie"


# authorization boundaries
class RepresentationDenied(Forbidden):
    tag = "representation-denied"


class NotOwner(Forbidden):
    tag = "not-owner"


class NotReceiver(Forbidden):
    tag = "not-receiver"


class NotParty(Forbidden):
    tag = "not-party"


class ReverseRelationNotOwned(Forbidden):
    tag = "reverse-relation-not-owned"


class RelationNotOwned(Forbidden):
    tag = "relation-not-owned"


# state conflicts
class DuplicateName(Conflict):
    tag = "duplicate-name"


class DuplicateTie(Conflict):
    tag = "duplicate-tie"


class CycleDetected(Conflict):
    tag = "cycle-detected"


class NotPending(Conflict):
    tag = "not-pending"


class NameCollision(Conflict):
    tag = "name-collision"


# structural invariants
class SelfTie(InvariantError):
    tag = "self-tie"


class CrossOwnerEdge(InvariantError):
    tag = "cross-owner-edge"


class TieToPublicRelation(InvariantError):
    tag = "tie-to-public-relation"


class PublicReciprocalConflict(InvariantError):
    tag = "public-reciprocal-conflict"


class ReverseRelationNotReciprocal(InvariantError):
    tag = "reverse-relation-not-reciprocal"


class KindMismatch(InvariantError):
    tag = "kind-mismatch"


class InvariantViolation(InvariantError):
    tag = "invariant-violation"


# persistence
class StorageError(TierbacError):
    tag = "io-error"


class SequenceGap(StorageError):
    tag = "sequence-gap"


class CorruptSnapshot(StorageError):
    tag = "corrupt-snapshot"
