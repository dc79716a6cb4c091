"""Random stores and mutation runs built through the public model API."""

from tierbac import errors
from tierbac.model import Permission, Store, TieState

ACTIONS = ["read", "post", "edit", "represent"]
CLASSES = ["wall", "profile", "agenda", "*"]
KINDS = ["user", "space", "event"]


def random_permission(rng):
    action = rng.choice(ACTIONS)
    if action == "represent":
        return Permission("represent", "*")
    return Permission(action, rng.choice(CLASSES))


def random_store(rng, *, max_actors=10, max_relations=4, max_perms=3, max_edges=3, max_ties=15, store=None):
    store = store or Store()
    actors = [store.create_actor(f"actor{i}", rng.choice(KINDS)) for i in range(rng.randint(2, max_actors))]
    rels = {}
    for a in actors:
        rels[a] = []
        for j in range(rng.randint(0, max_relations)):
            public = rng.random() < 0.15
            reciprocal = not public and rng.random() < 0.3
            rid = store.define_relation(a, f"rel{j}", reciprocal, public)
            rels[a].append(rid)
            for _ in range(rng.randint(0, max_perms)):
                store.grant_permission(a, rid, random_permission(rng))
        for _ in range(rng.randint(0, max_edges)):
            if len(rels[a]) < 2:
                break
            s, w = rng.sample(rels[a], 2)
            try:
                store.add_strength_edge(a, s, w)
            except errors.CycleDetected:
                pass
    for _ in range(rng.randint(0, max_ties)):
        sender = rng.choice(actors)
        options = [r for r in rels[sender] if not store.relation(r).public_flag]
        receivers = [x for x in actors if x != sender]
        if not options or not receivers:
            continue
        rid, receiver = rng.choice(options), rng.choice(receivers)
        try:
            tid, state = store.add_tie(sender, rid, receiver)
        except errors.DuplicateTie:
            continue
        if state is TieState.PENDING and rng.random() < 0.6:
            back = [r for r in rels[receiver] if store.relation(r).reciprocal]
            if back:
                try:
                    store.accept_tie(receiver, tid, rng.choice(back))
                except errors.DuplicateTie:
                    pass
    return store, actors


def random_check(rng, actors):
    action = rng.choice(ACTIONS)
    cls = "*" if action == "represent" else rng.choice(CLASSES)
    return rng.choice(actors), action, cls, rng.choice(actors)


def random_mutations(s, rng, actors, steps):
    """Apply ``steps`` successful random mutations; rejected attempts leave no trace."""
    done = 0
    while done < steps:
        before = s.version
        op = rng.choice([0, 1, 1, 2, 2, 3, 4, 5, 5, 5, 6, 7, 7])
        a, b = rng.choice(actors), rng.choice(actors)
        rels = s.relations_of(a)
        try:
            if op == 0:
                actors.append(s.create_actor(f"n{len(actors)}", rng.choice(["user", "space", "event"])))
            elif op == 1:
                s.define_relation(a, f"r{rng.randrange(1000)}", rng.random() < 0.3)
            elif op == 2 and rels:
                s.grant_permission(a, rng.choice(rels).id, Permission(rng.choice(["read", "post"]), "wall"))
            elif op == 3 and rels:
                s.revoke_permission(a, rng.choice(rels).id, Permission(rng.choice(["read", "post"]), "wall"))
            elif op == 4 and len(rels) > 1:
                x, y = rng.sample(rels, 2)
                s.add_strength_edge(a, x.id, y.id)
            elif op == 5 and rels:
                s.add_tie(a, rng.choice(rels).id, b)
            elif op == 7:
                pending = [t for t in s.ties() if t.state is TieState.PENDING]
                if pending:
                    t = rng.choice(pending)
                    back = [r for r in s.relations_of(t.receiver) if r.reciprocal]
                    if back:
                        s.accept_tie(t.receiver, t.id, rng.choice(back).id)
            elif op == 6 and s.ties():
                t = rng.choice(s.ties())
                s.remove_tie(t.receiver, t.id)
        except errors.TierbacError:
            assert s.version == before
        done += s.version > before
