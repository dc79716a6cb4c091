"""Brute-force reference for authorization results.

Works only on ``Store.state_dict()`` output and shares no code with
``tierbac.authz``: closures are computed by fixed-point iteration over every
relation, and representation by trying every actor as a principal.
"""

REPRESENT = ("represent", "*")


class Oracle:
    def __init__(self, state):
        self.actors = [a["id"] for a in state["actors"]]
        self.relations = {r["id"]: r for r in state["relations"]}
        self.ties = state["ties"]

    def closure(self, rid):
        members = {rid}
        while True:
            grown = set(members)
            for r in self.relations.values():
                if r["id"] in members:
                    grown.update(r["weaker"])
            if grown == members:
                return members
            members = grown

    def closure_perms(self, rid):
        return {tuple(p) for m in self.closure(rid) for p in self.relations[m]["permissions"]}

    def tie_perms(self, owner, agent):
        out = set()
        for t in self.ties:
            if t["sender"] == owner and t["receiver"] == agent and t["state"] == "accepted":
                out |= self.closure_perms(t["relation"])
        return out

    def public_perms(self, owner):
        out = set()
        for r in self.relations.values():
            if r["owner"] == owner and r["public_flag"]:
                out |= self.closure_perms(r["id"])
        return out

    def effective(self, owner, agent):
        return self.tie_perms(owner, agent) | self.public_perms(owner)

    @staticmethod
    def grants(perms, action, object_class):
        return (action, object_class) in perms or (action, "*") in perms

    def can_represent(self, agent, principal):
        return agent == principal or REPRESENT in self.effective(principal, agent)

    def direct(self, agent, action, object_class, owner):
        if agent == owner:
            return "self-owner"
        if self.grants(self.tie_perms(owner, agent), action, object_class):
            return "direct-tie"
        if self.grants(self.public_perms(owner), action, object_class):
            return "public-grant"
        return None

    def check(self, agent, action, object_class, owner):
        first = self.direct(agent, action, object_class, owner)
        if first:
            return (True, first)
        for principal in self.actors:
            if principal != agent and self.can_represent(agent, principal):
                if self.direct(principal, action, object_class, owner):
                    return (True, "via-representation")
        return (False, "denied")
