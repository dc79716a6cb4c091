import io
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierbac import Permission, Store, builtin_catalogs, check, errors
from tierbac.events import EventRecord
from tierbac.store import (
    LOG_FILE,
    SNAPSHOT_FILE,
    EventLog,
    MemoryLog,
    init_store,
    load,
    open_store,
    parse_log,
    read_log,
    snapshot,
    write_snapshot,
)

from gen import random_check, random_mutations, random_store
from oracle import Oracle


def _event(seq, name="x"):
    return EventRecord(seq, "actor-created", {"id": f"a{seq}", "name": name, "kind": "user"})


def _round_trip(s):
    buf = io.StringIO()
    snapshot(s, buf)
    buf.seek(0)
    return load(buf)


def _journaled(**kw):
    log = MemoryLog()
    return Store(journal=log, **kw), log


def test_first_seq_is_one():
    s, log = _journaled()
    s.create_actor("A", "user")
    assert [e.seq for e in log.events] == [1]


def test_sequence_gap():
    log = MemoryLog([_event(1), _event(2), _event(3)])
    with pytest.raises(errors.SequenceGap):
        log.append(_event(5))
    assert log.last_seq == 3


def test_file_log_sequence_gap(tmp_path):
    with EventLog(tmp_path / LOG_FILE, fsync=False) as log:
        log.append_many([_event(1), _event(2), _event(3)])
        with pytest.raises(errors.SequenceGap):
            log.append(_event(5))
    assert [e.seq for e in read_log(tmp_path / LOG_FILE)] == [1, 2, 3]


def test_thousand_events_replay_to_live_state():
    rng = random.Random(7)
    s, log = _journaled()
    actors = [s.create_actor(f"a{i}", "user") for i in range(5)]
    random_mutations(s, rng, actors, 995)
    assert len(log.events) == s.version >= 1000
    replayed = load(None, log.events)
    assert replayed == s
    assert replayed.state_dict() == s.state_dict()


def test_empty_snapshot_round_trip():
    restored = _round_trip(Store())
    assert restored == Store()
    assert restored.version == 0 and restored.actors() == []


def test_load_empty_snapshot_empty_tail():
    assert load(None, []) == Store()


def test_snapshot_header_and_sorted_body():
    buf = io.StringIO()
    s = Store()
    s.create_actor("A", "user")
    meta = snapshot(s, buf)
    head, body = buf.getvalue().split("\n", 1)
    assert head == "tierbac-snapshot v1"
    assert json.loads(body) == s.state_dict()
    assert body == json.dumps(json.loads(body), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    assert (meta.last_seq, meta.actors, meta.relations, meta.ties) == (1, 1, 0, 0)


def test_scenario_snapshot_answers_identically(alice_bob):
    s = alice_bob["store"]
    restored = _round_trip(s)
    actors = [a.id for a in s.actors()]
    for agent in actors:
        for owner in actors:
            for action in ("read", "post", "edit"):
                for cls in ("wall", "profile", "*"):
                    assert check(restored, agent, action, cls, owner) == check(s, agent, action, cls, owner)


def test_snapshot_plus_tail(alice_bob):
    s = alice_bob["store"]
    buf = io.StringIO()
    meta = snapshot(s, buf)
    log = MemoryLog(after=meta.last_seq)
    s.journal = log
    s.create_actor("Eve", "user")
    s.revoke_permission(alice_bob["alice"], alice_bob["friend"], Permission("post", "wall"))
    s.remove_tie(alice_bob["bob"], alice_bob["tie"])
    assert len(log.events) == 3
    buf.seek(0)
    assert load(buf, log.events) == s


def test_tail_must_follow_snapshot(alice_bob):
    s = alice_bob["store"]
    buf = io.StringIO()
    snapshot(s, buf)
    buf.seek(0)
    with pytest.raises(errors.SequenceGap):
        load(buf, [_event(s.version + 2)])


def _tampered_log():
    s, log = _journaled()
    alice = s.create_actor("Alice", "user")
    bob = s.create_actor("Bob", "user")
    s.define_relation(alice, "friend")
    bobs = s.define_relation(bob, "secret")
    s.add_tie(alice, s.relation_named(alice, "friend").id, bob)
    records = [e.to_dict() for e in log.events]
    records[-1]["payload"]["relation"] = bobs
    return "\n".join(["tierbac-log v1"] + [json.dumps(r) for r in records]) + "\n"


def test_tampered_tie_is_rejected():
    events = parse_log(io.StringIO(_tampered_log()))
    with pytest.raises(errors.InvariantViolation):
        load(None, events)


def test_tampered_snapshot_is_rejected(alice_bob):
    s = alice_bob["store"]
    data = s.state_dict()
    other = s.define_relation(alice_bob["bob"], "secret")
    data["relations"].append({**data["relations"][0], "id": other, "owner": alice_bob["bob"], "name": "secret"})
    data["ties"][0]["relation"] = other
    text = "tierbac-snapshot v1\n" + json.dumps(data)
    with pytest.raises(errors.InvariantViolation):
        load(io.StringIO(text))


@pytest.mark.parametrize(
    "text",
    ["", "tierbac-snapshot v2\n{}", "tierbac-snapshot v1\n{not json", "tierbac-snapshot v1\n[1, 2]"],
)
def test_corrupt_snapshot(text):
    with pytest.raises(errors.CorruptSnapshot):
        load(io.StringIO(text))


def test_corrupt_log_lines():
    with pytest.raises(errors.CorruptSnapshot):
        parse_log(io.StringIO("tierbac-log v0\n"))
    with pytest.raises(errors.CorruptSnapshot):
        parse_log(io.StringIO('tierbac-log v1\n{"seq": 1}\n'))
    body = "\n".join(json.dumps(_event(n).to_dict()) for n in (1, 2, 4))
    with pytest.raises(errors.SequenceGap):
        parse_log(io.StringIO("tierbac-log v1\n" + body))


def test_timestamps_do_not_affect_equality():
    a, b = _event(1), _event(1)
    assert a == EventRecord(1, a.kind, a.payload, timestamp="1970-01-01T00:00:00+00:00")
    assert a == b


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_persist_reload_round_trip(seed):
    rng = random.Random(seed)
    s, log = _journaled()
    s, actors = random_store(rng, store=s, max_actors=5)
    random_mutations(s, rng, actors, 200)
    buf = io.StringIO()
    snapshot(s, buf)
    buf.seek(0)
    from_snapshot = load(buf)
    from_log = load(None, log.events)
    assert from_snapshot == s and from_log == s
    oracle = Oracle(s.state_dict())
    for _ in range(30):
        args = random_check(rng, actors)
        d = check(from_log, *args)
        assert d == check(s, *args)
        assert (d.allowed, d.reason.value) == oracle.check(*args)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_every_prefix_is_consistent(seed):
    rng = random.Random(seed)
    s, log = _journaled()
    _, actors = random_store(rng, store=s, max_actors=4)
    random_mutations(s, rng, actors, 60)
    replay = Store()
    for e in log.events:
        replay.apply_event(e)
        replay.verify()
    assert replay == s


class _FailingLog(MemoryLog):
    def __init__(self):
        super().__init__()
        self.fail = False

    def append_many(self, events):
        if self.fail:
            raise errors.StorageError("disk full")
        super().append_many(events)


def test_failed_append_is_not_acknowledged():
    log = _FailingLog()
    s = Store(journal=log)
    alice = s.create_actor("Alice", "user")
    friend = s.define_relation(alice, "friend")
    before = s.state_dict()
    log.fail = True
    with pytest.raises(errors.StorageError):
        s.grant_permission(alice, friend, Permission("read", "wall"))
    with pytest.raises(errors.StorageError):
        s.create_actor("Bob", "user")
    assert s.state_dict() == before
    log.fail = False
    s.create_actor("Bob", "user")
    assert load(None, log.events) == s


def test_directory_store_survives_reopen(tmp_path):
    root = init_store(tmp_path / "db", defaults="builtin")
    s = open_store(root, fsync=False)
    alice = s.create_actor("Alice", "user")
    bob = s.create_actor("Bob", "user")
    tid, _ = s.add_tie(alice, s.relation_named(alice, "friend").id, bob)
    s.accept_tie(bob, tid, s.relation_named(bob, "friend").id)
    live = s.state_dict()
    s.journal.close()  # simulated crash: no snapshot was ever written

    again = open_store(root, fsync=False)
    assert again.state_dict() == live
    write_snapshot(again, root)
    again.create_actor("Carol", "user")
    after = again.state_dict()
    again.journal.close()

    third = open_store(root, fsync=False)
    assert third.state_dict() == after
    assert (root / SNAPSHOT_FILE).read_text().startswith("tierbac-snapshot v1\n")
    assert (root / LOG_FILE).read_text().startswith("tierbac-log v1\n")
    third.journal.close()


def test_init_twice_conflicts(tmp_path):
    init_store(tmp_path)
    with pytest.raises(errors.Conflict):
        init_store(tmp_path)


def test_builtin_defaults_are_journaled(tmp_path):
    s = Store(catalogs=builtin_catalogs(), journal=MemoryLog())
    s.create_actor("Lab", "space")
    assert load(None, s.journal.events) == s
