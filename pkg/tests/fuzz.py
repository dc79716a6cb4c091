"""Random (token, acting-as, endpoint) requests checked against the engine itself."""

import random

from fastapi.testclient import TestClient

from tierbac import ActingPair, Permission, Store, can_represent, errors
from tierbac.api import ServiceConfig, Unauthorized, create_app, status_for


def _fuzz_world(rng):
    """Small graph with delegation so acting-as requests are sometimes legal."""
    s = Store()
    actors = [s.create_actor(f"x{i}", rng.choice(["user", "space"])) for i in range(5)]
    for a in actors:
        for j in range(2):
            rid = s.define_relation(a, f"rel{j}", reciprocal=j == 1)
            if j == 0 and rng.random() < 0.7:
                s.grant_permission(a, rid, Permission("represent", "*"))
    for _ in range(10):
        a, b = rng.sample(actors, 2)
        try:
            s.add_tie(a, s.relation_named(a, "rel0").id, b)
        except errors.DuplicateTie:
            pass
    return s, actors


def _random_request(rng, s, actors, principal):
    """Targets lean toward the principal's own relations and ties so many requests can succeed."""
    own = [r.id for r in s.relations() if r.owner == principal]
    rels = [r.id for r in s.relations()] + ["r999"]
    ties = [t.id for t in s.ties()] + ["t999"]
    mine = [t.id for t in s.ties() if principal in (t.sender, t.receiver)]
    pick = lambda local, every: rng.choice(local) if local and rng.random() < 0.7 else rng.choice(every)
    rel, tie = pick(own, rels), pick(mine, ties)
    who = pick([principal] if principal else [], actors + ["a999"])
    perm = {"action": rng.choice(["read", "post", "represent"]), "object_class": rng.choice(["wall", "*"])}
    kind = rng.randrange(9)
    if kind == 0:
        return ("POST", f"/actors/{who}/relations", {"name": f"n{rng.randrange(5)}", "reciprocal": rng.random() < 0.5})
    if kind == 1:
        return ("POST", f"/relations/{rel}/permissions", perm)
    if kind == 2:
        return ("DELETE", f"/relations/{rel}/permissions", perm)
    if kind == 3:
        return ("POST", f"/relations/{rel}/stronger", {"weaker": pick(own, rels)})
    if kind == 4:
        return ("POST", "/ties", {"relation": rel, "receiver": rng.choice(actors + ["a999"])})
    if kind == 5:
        return ("POST", f"/ties/{tie}/accept", {"reverse_relation": rel})
    if kind == 6:
        return ("POST", f"/ties/{tie}/reject", None)
    if kind == 7:
        return ("DELETE", f"/ties/{tie}", None)
    return ("GET", f"/actors/{who}/contacts", None)


def _in_process(s, acting, method, path, body):
    """Run the request against the engine directly; return the expected status."""
    parts = path.strip("/").split("/")
    try:
        if not isinstance(acting, ActingPair):
            raise acting
        s._resolve(acting)
        if parts[0] == "actors" and parts[-1] == "relations":
            s.define_relation(parts[1], body["name"], body["reciprocal"], acting=acting)
        elif parts[0] == "actors":
            s.contacts(parts[1], acting=acting)
        elif parts[-1] == "permissions":
            fn = s.grant_permission if method == "POST" else s.revoke_permission
            fn(acting, parts[1], Permission(body["action"], body["object_class"]))
        elif parts[-1] == "stronger":
            s.add_strength_edge(acting, parts[1], body["weaker"])
        elif parts == ["ties"]:
            s.add_tie(acting, body["relation"], body["receiver"])
        elif parts[-1] == "accept":
            s.accept_tie(acting, parts[1], body["reverse_relation"])
        elif parts[-1] == "reject":
            s.reject_tie(acting, parts[1])
        else:
            s.remove_tie(acting, parts[1])
    except errors.TierbacError as exc:
        return 401 if exc.tag == "unauthorized" else status_for(exc)
    return 201 if method == "POST" and parts[-1] in ("relations", "ties") else 200


def run_fuzz(seed, n):
    """Fire ``n`` random (token, acting-as, endpoint) requests.

    Returns (requests, mismatches); a mismatch is any response whose status
    differs from what the engine itself says about the same operation.
    """
    rng = random.Random(seed)
    s, actors = _fuzz_world(rng)
    tokens = {f"tok{i}": a for i, a in enumerate(actors)}
    c = TestClient(create_app(s, ServiceConfig(tokens=tokens)))
    mismatches = []
    for _ in range(n):
        token = rng.choice(list(tokens) * 4 + ["bogus", None])
        agent = tokens.get(token)
        delegable = [a for a in actors if agent and a != agent and can_represent(s, agent, a)]
        roll = rng.random()
        if delegable and roll < 0.5:
            acting_as = rng.choice(delegable)
        elif roll < 0.8:
            acting_as = None
        else:
            acting_as = rng.choice(actors + ["a999"])
        principal = acting_as or agent
        method, path, body = _random_request(rng, s, actors, principal)
        shadow = Store.from_state_dict(s.state_dict())
        if token is None or token not in tokens:
            acting = Unauthorized("no session")
        else:
            acting = ActingPair(tokens[token], acting_as or tokens[token])
        expected = _in_process(shadow, acting, method, path, body)
        headers = {}
        if token is not None:
            headers["Authorization"] = f"Bearer {token}"
        if acting_as is not None:
            headers["X-Acting-As"] = acting_as
        resp = c.request(method, path, json=body, headers=headers)
        ok = resp.status_code < 300
        if ok != (expected < 300) or resp.status_code != expected:
            mismatches.append((token, acting_as, method, path, body, resp.status_code, expected))
        if ok and method != "GET":
            assert s == shadow, (method, path)
    return n, mismatches
