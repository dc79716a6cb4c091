"""Snapshot plus append-only event log persistence.

A store directory holds up to three files:

``store.json``      configuration (extra actor kinds, default catalogs)
``state.snapshot``  header line ``tierbac-snapshot v1`` + one JSON document
``events.log``      header line ``tierbac-log v1`` + one JSON record per line

Opening a directory loads the snapshot (if any) and replays the log records
that follow it. The exact formats are described in ``docs/formats.md``.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Optional, Union

from . import errors
from .defaults import builtin_catalogs, load_catalogs
from .events import EventRecord
from .model import Store

log = logging.getLogger(__name__)

SNAPSHOT_HEADER = "tierbac-snapshot v1"
LOG_HEADER = "tierbac-log v1"
SNAPSHOT_FILE = "state.snapshot"
LOG_FILE = "events.log"
CONFIG_FILE = "store.json"


def _dumps(data: Any, **kw: Any) -> str:
    return json.dumps(data, sort_keys=True, ensure_ascii=False, **kw)


class MemoryLog:
    """List-backed journal with the same sequencing rules as :class:`EventLog`."""

    def __init__(self, events: Optional[Iterable[EventRecord]] = None, *, after: int = 0):
        # ``after`` lets a log begin past a snapshot's last seq
        self.events: list[EventRecord] = []
        self.after = after
        for e in events or ():
            self.append(e)

    @property
    def last_seq(self) -> int:
        return self.events[-1].seq if self.events else self.after

    def append(self, event: EventRecord) -> None:
        self.append_many([event])

    def append_many(self, events: list[EventRecord]) -> None:
        expected = self.last_seq + 1
        for e in events:
            if e.seq != expected:
                raise errors.SequenceGap(f"expected seq {expected}, got {e.seq}")
            expected += 1
        self.events.extend(events)


class EventLog:
    """Newline-delimited event file. Every append is flushed and fsync'd."""

    def __init__(self, path: Union[str, Path], *, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        if self.path.exists() and self.path.stat().st_size > 0:
            events = read_log(self.path)
            self.last_seq = events[-1].seq if events else 0
            self._fh = open(self.path, "a", encoding="utf-8")
        else:
            self.last_seq = 0
            self._fh = open(self.path, "w", encoding="utf-8")
            self._fh.write(LOG_HEADER + "\n")
            self._sync()

    def _sync(self) -> None:
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def append(self, event: EventRecord) -> None:
        self.append_many([event])

    def append_many(self, events: list[EventRecord]) -> None:
        expected = self.last_seq + 1
        for e in events:
            if e.seq != expected:
                raise errors.SequenceGap(f"expected seq {expected}, got {e.seq}")
            expected += 1
        try:
            self._fh.write("".join(_dumps(e.to_dict()) + "\n" for e in events))
            self._sync()
        except OSError as exc:
            raise errors.StorageError(str(exc)) from exc
        self.last_seq = expected - 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def parse_log(lines: Iterable[str]) -> list[EventRecord]:
    it = iter(lines)
    header = next(it, "").rstrip("\n")
    if header != LOG_HEADER:
        raise errors.CorruptSnapshot(f"bad log header {header!r}")
    events: list[EventRecord] = []
    for n, line in enumerate(it, start=2):
        if not line.strip():
            continue
        try:
            event = EventRecord.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise errors.CorruptSnapshot(f"log line {n}: {exc}") from None
        expected = events[-1].seq + 1 if events else event.seq
        if event.seq != expected or event.seq < 1:
            raise errors.SequenceGap(f"log line {n}: expected seq {expected}, got {event.seq}")
        events.append(event)
    return events


def read_log(path: Union[str, Path]) -> list[EventRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_log(fh)


@dataclass(frozen=True)
class SnapshotMeta:
    last_seq: int
    actors: int
    relations: int
    ties: int


def snapshot(store: Store, target: IO[str]) -> SnapshotMeta:
    """Serialize the whole graph. Holds the store lock, so no write is in flight."""
    with store.lock:
        state = store.state_dict()
    target.write(SNAPSHOT_HEADER + "\n")
    target.write(_dumps(state, indent=2) + "\n")
    return SnapshotMeta(state["version"], len(state["actors"]), len(state["relations"]), len(state["ties"]))


def read_snapshot(source: IO[str]) -> dict[str, Any]:
    header = source.readline().rstrip("\n")
    if header != SNAPSHOT_HEADER:
        raise errors.CorruptSnapshot(f"bad snapshot header {header!r}")
    try:
        data = json.loads(source.read())
    except ValueError as exc:
        raise errors.CorruptSnapshot(str(exc)) from None
    if not isinstance(data, dict):
        raise errors.CorruptSnapshot("snapshot body is not an object")
    return data


def load(
    source: Optional[IO[str]],
    log_tail: Iterable[EventRecord] = (),
    **store_kwargs: Any,
) -> Store:
    """Rebuild a store from a snapshot stream (or nothing) plus the log tail.

    Every invariant is re-verified; corrupt or inconsistent input raises.
    """
    if source is None:
        store = Store(**store_kwargs)
    else:
        data = read_snapshot(source)
        kinds = store_kwargs.pop("kinds", None)
        if kinds is not None and set(data.get("kinds", [])) - set(Store(kinds=kinds).kinds):
            raise errors.CorruptSnapshot("snapshot uses kinds missing from the configuration")
        try:
            store = Store.from_state_dict(data, **store_kwargs)
        except errors.InvariantError:
            raise
        except errors.TierbacError as exc:
            raise errors.InvariantViolation(f"{exc.tag}: {exc.detail}") from exc
    journal, store.journal = store.journal, None
    for event in log_tail:
        try:
            store.apply_event(event)
        except (errors.SequenceGap, errors.InvariantViolation):
            raise
        except errors.TierbacError as exc:
            raise errors.InvariantViolation(f"seq {event.seq}: {exc.tag}: {exc.detail}") from exc
    store.verify()
    store.journal = journal
    return store


# ----------------------------------------------------------- directories


@dataclass
class StoreConfig:
    kinds: list[str]
    defaults: str = "none"  # "none", "builtin" or a catalog file path

    def catalogs(self, base: Path) -> dict:
        if self.defaults == "none":
            return {}
        if self.defaults == "builtin":
            return builtin_catalogs()
        return load_catalogs(base / self.defaults)


def init_store(path: Union[str, Path], *, defaults: str = "none", kinds: Optional[list[str]] = None) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if (root / CONFIG_FILE).exists() or (root / LOG_FILE).exists():
        raise errors.Conflict(f"{root} already holds a store")
    config = {"format": 1, "kinds": list(kinds or []), "defaults": defaults}
    StoreConfig(config["kinds"], defaults).catalogs(root)  # fail early on a bad catalog
    (root / CONFIG_FILE).write_text(_dumps(config, indent=2) + "\n", encoding="utf-8")
    EventLog(root / LOG_FILE).close()
    return root


def read_config(root: Path) -> StoreConfig:
    try:
        raw = json.loads((root / CONFIG_FILE).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise errors.StorageError(f"{root} is not a store (run init first)") from None
    except ValueError as exc:
        raise errors.CorruptSnapshot(f"{CONFIG_FILE}: {exc}") from None
    return StoreConfig(list(raw.get("kinds", [])), str(raw.get("defaults", "none")))


def open_store(path: Union[str, Path], *, fsync: bool = True, **store_kwargs: Any) -> Store:
    """Load a store directory and attach its event log as the journal."""
    root = Path(path)
    config = read_config(root)
    store_kwargs.setdefault("catalogs", config.catalogs(root))
    events = read_log(root / LOG_FILE) if (root / LOG_FILE).exists() else []
    snap = root / SNAPSHOT_FILE
    if snap.exists():
        with open(snap, encoding="utf-8") as fh:
            data_start = read_snapshot(fh).get("version", 0)
        tail = [e for e in events if e.seq > data_start]
        if events and events[0].seq > data_start + 1:
            raise errors.SequenceGap(f"log starts at {events[0].seq}, snapshot ends at {data_start}")
        with open(snap, encoding="utf-8") as fh:
            store = load(fh, tail, kinds=config.kinds, **store_kwargs)
    else:
        store = load(None, events, kinds=config.kinds, **store_kwargs)
    journal = EventLog(root / LOG_FILE, fsync=fsync)
    if journal.last_seq != store.version:
        journal.close()
        raise errors.SequenceGap(f"log ends at {journal.last_seq} but the store is at {store.version}")
    store.journal = journal
    log.debug("opened %s at version %d", root, store.version)
    return store


def write_snapshot(store: Store, path: Union[str, Path]) -> SnapshotMeta:
    """Atomically replace ``state.snapshot`` in a store directory."""
    root = Path(path)
    tmp = root / (SNAPSHOT_FILE + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        meta = snapshot(store, fh)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, root / SNAPSHOT_FILE)
    return meta


def close_store(store: Store) -> None:
    close = getattr(store.journal, "close", None)
    if close is not None:
        close()
