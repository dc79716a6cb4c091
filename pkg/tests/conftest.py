from pathlib import Path

import pytest

from tierbac import ActingPair, Permission, Store

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def store():
    return Store()


@pytest.fixture
def alice_bob(store):
    """Alice's friend relation grants read/post on her wall; Alice ties Bob."""
    alice = store.create_actor("Alice", "user")
    bob = store.create_actor("Bob", "user")
    dana = store.create_actor("Dana", "user")
    friend = store.define_relation(alice, "friend")
    store.grant_permission(alice, friend, Permission("read", "wall"))
    store.grant_permission(alice, friend, Permission("post", "wall"))
    tie, _ = store.add_tie(alice, friend, bob)
    return dict(store=store, alice=alice, bob=bob, dana=dana, friend=friend, tie=tie)


@pytest.fixture
def delegation(store):
    dept = store.create_actor("computer science department", "space")
    charlie = store.create_actor("Charlie", "user")
    delegate = store.define_relation(dept, "delegate")
    store.grant_permission(ActingPair.self(dept), delegate, Permission("represent", "*"))
    tie, _ = store.add_tie(dept, delegate, charlie)
    return dict(store=store, dept=dept, charlie=charlie, delegate=delegate, tie=tie)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[0].split("-")[1])):
            terminalreporter.write_line(line)
