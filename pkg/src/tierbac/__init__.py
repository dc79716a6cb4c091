"""Relationship-based authorization over actor-defined relations and ties."""

from .authz import (
    ActingPair,
    Decision,
    Reason,
    can_represent,
    check,
    closure_permissions,
    effective_permissions,
    weaker_closure,
)
from .defaults import DefaultCatalog, builtin_catalogs, install_defaults
from .model import Actor, Permission, Relation, Store, Tie, TieState

__all__ = [
    "ActingPair",
    "Actor",
    "Decision",
    "DefaultCatalog",
    "Permission",
    "Reason",
    "Relation",
    "Store",
    "Tie",
    "TieState",
    "builtin_catalogs",
    "can_represent",
    "check",
    "closure_permissions",
    "effective_permissions",
    "install_defaults",
    "weaker_closure",
]
