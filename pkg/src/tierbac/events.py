"""Mutation records shared by the model (producer) and the store (persistence)."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

EVENT_KINDS = (
    "actor-created",
    "relation-defined",
    "permission-granted",
    "permission-revoked",
    "edge-added",
    "tie-added",
    "tie-accepted",
    "tie-rejected",
    "tie-removed",
)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class EventRecord:
    seq: int
    kind: str
    payload: dict[str, Any]
    # informational only, never part of equality
    timestamp: str = field(default_factory=_now, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EventRecord":
        seq, kind, payload = data["seq"], data["kind"], data["payload"]
        if not isinstance(seq, int) or isinstance(seq, bool) or kind not in EVENT_KINDS or not isinstance(payload, dict):
            raise ValueError(f"malformed event record: {data!r}")
        return cls(seq=seq, kind=kind, payload=payload, timestamp=str(data.get("timestamp", "")))
