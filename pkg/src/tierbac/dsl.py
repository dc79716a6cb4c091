"""Line-oriented scenario language (``.trbac`` files).

One statement per line, ``#`` starts a comment::

    actor Alice user
    actor Bob user
    relation Alice.friend
    grant Alice.friend read wall
    tie Alice -> Bob : friend
    check Bob read wall on Alice expect allow

Full grammar::

    actor <name> <kind>
    relation <owner>.<name> [reciprocal] [public]
    grant <owner>.<relation> <action> <object_class|*>
    stronger <owner>.<a> > <owner>.<b>
    tie <sender> -> <receiver> : <relation>
    accept <receiver> <sender>.<relation> with <receiver-relation>
    check <agent> <action> <object_class> on <owner> expect <allow|deny>

Names containing spaces or punctuation are double-quoted, with ``\\"`` and
``\\\\`` as the only escapes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from . import authz, errors
from .model import ActorId, Permission, Store, TieState


class DslSyntaxError(errors.InvalidInput):
    tag = "syntax-error"

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class ElaborationError(errors.TierbacError):
    def __init__(self, line: int, detail: str, cause: Optional[errors.TierbacError] = None):
        super().__init__(f"line {line}: {detail}")
        self.line = line
        self.cause = cause


class UnresolvedName(ElaborationError):
    tag = "unresolved-name"


class ModelError(ElaborationError):
    tag = "model-error"


# --------------------------------------------------------------- statements


@dataclass(frozen=True)
class ActorDecl:
    name: str
    kind: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RelationDecl:
    owner: str
    name: str
    reciprocal: bool = False
    public: bool = False
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Grant:
    owner: str
    relation: str
    action: str
    object_class: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Stronger:
    owner: str
    stronger: str
    weaker_owner: str
    weaker: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class TieDecl:
    sender: str
    receiver: str
    relation: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Accept:
    receiver: str
    sender: str
    relation: str
    reverse_relation: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Check:
    agent: str
    action: str
    object_class: str
    owner: str
    expect_allow: bool
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class DefaultsBlock:
    kind: str
    line: int = field(default=0, compare=False)


Statement = Union[ActorDecl, RelationDecl, Grant, Stronger, TieDecl, Accept, Check, DefaultsBlock]

# ------------------------------------------------------------------- lexing

_BARE = r'(?:[^\s".:>*#\-]|-(?!>))+'
_LEXEME = re.compile(
    rf'(?P<ws>\s+)|(?P<comment>#.*)|(?P<string>"(?:[^"\\]|\\.)*")|(?P<arrow>->)'
    rf"|(?P<punct>[.:>*])|(?P<word>{_BARE})"
)
_BARE_FULL = re.compile(rf"{_BARE}\Z")


@dataclass(frozen=True)
class _Tok:
    kind: str  # word | string | arrow | punct
    text: str
    value: str
    col: int


def _lex(text: str, lineno: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _LEXEME.match(text, pos)
        if m is None:
            if text[pos] == '"':
                raise DslSyntaxError(lineno, pos + 1, "unterminated string")
            raise DslSyntaxError(lineno, pos + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind != "ws":
            raw = m.group()
            value = re.sub(r"\\(.)", r"\1", raw[1:-1]) if kind == "string" else raw
            toks.append(_Tok(kind, raw, value, pos + 1))
        pos = m.end()
    return toks


class _Line:
    def __init__(self, toks: list[_Tok], lineno: int):
        self.toks = toks
        self.lineno = lineno
        self.i = 0

    def _fail(self, message: str, tok: Optional[_Tok] = None) -> DslSyntaxError:
        if tok is None:
            # ran out of input: point at the last thing we did see
            last = self.toks[-1]
            return DslSyntaxError(self.lineno, last.col, f"{message} after {last.text!r}")
        return DslSyntaxError(self.lineno, tok.col, f"{message}, found {tok.text!r}")

    def _next(self, message: str) -> _Tok:
        if self.i >= len(self.toks):
            raise self._fail(message)
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def name(self, what: str = "name") -> str:
        tok = self._next(f"expected {what}")
        if tok.kind not in ("word", "string"):
            raise self._fail(f"expected {what}", tok)
        return tok.value

    def word(self, what: str, allow_star: bool = False) -> str:
        tok = self._next(f"expected {what}")
        if tok.kind == "word" or (allow_star and tok.text == "*"):
            return tok.value
        raise self._fail(f"expected {what}", tok)

    def punct(self, text: str) -> None:
        tok = self._next(f"expected {text!r}")
        if tok.text != text or tok.kind == "string":
            raise self._fail(f"expected {text!r}", tok)

    def keyword(self, *options: str) -> str:
        want = " or ".join(repr(o) for o in options)
        tok = self._next(f"expected {want}")
        if tok.kind != "word" or tok.value not in options:
            raise self._fail(f"expected {want}", tok)
        return tok.value

    def ref(self, what: str) -> tuple[str, str]:
        owner = self.name(f"{what} owner")
        self.punct(".")
        return owner, self.name(f"{what} name")

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def end(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise self._fail("expected end of line", tok)


def _parse_line(p: _Line, catalog: bool) -> Statement:
    head = p.toks[0]
    p.i = 1
    ln = p.lineno
    keyword = head.value if head.kind == "word" else ""
    if keyword == "actor":
        stmt: Statement = ActorDecl(p.name("actor name"), p.word("actor kind"), line=ln)
    elif keyword == "relation":
        owner, name = p.ref("relation")
        flags: set[str] = set()
        while p.peek() is not None:
            tok = p.peek()
            flag = p.keyword("reciprocal", "public")
            if flag in flags:
                raise p._fail("repeated flag", tok)
            flags.add(flag)
        stmt = RelationDecl(owner, name, "reciprocal" in flags, "public" in flags, line=ln)
    elif keyword == "grant":
        owner, rel = p.ref("relation")
        stmt = Grant(owner, rel, p.word("action"), p.word("object class", allow_star=True), line=ln)
    elif keyword == "stronger":
        owner, strong = p.ref("relation")
        p.punct(">")
        weak_owner, weak = p.ref("relation")
        stmt = Stronger(owner, strong, weak_owner, weak, line=ln)
    elif keyword == "tie":
        sender = p.name("sender")
        p.punct("->")
        receiver = p.name("receiver")
        p.punct(":")
        stmt = TieDecl(sender, receiver, p.name("relation name"), line=ln)
    elif keyword == "accept":
        receiver = p.name("receiver")
        sender, rel = p.ref("tie")
        p.keyword("with")
        stmt = Accept(receiver, sender, rel, p.name("reverse relation"), line=ln)
    elif keyword == "check":
        agent = p.name("agent")
        action = p.word("action")
        object_class = p.word("object class", allow_star=True)
        p.keyword("on")
        owner = p.name("owner")
        p.keyword("expect")
        stmt = Check(agent, action, object_class, owner, p.keyword("allow", "deny") == "allow", line=ln)
    elif keyword == "defaults" and catalog:
        stmt = DefaultsBlock(p.word("actor kind"), line=ln)
    else:
        raise DslSyntaxError(ln, head.col, f"unknown statement {head.text!r}")
    p.end()
    return stmt


def parse(source: str, *, catalog: bool = False) -> list[Statement]:
    """Parse a whole file; the first syntax error aborts with no partial result."""
    statements: list[Statement] = []
    # only \n ends a statement; other Unicode separators may appear in quoted names
    for lineno, text in enumerate(source.split("\n"), start=1):
        toks = _lex(text.rstrip("\r"), lineno)
        if toks:
            statements.append(_parse_line(_Line(toks, lineno), catalog))
    return statements


# ---------------------------------------------------------- pretty printing


def quote(name: str) -> str:
    if _BARE_FULL.match(name):
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_statement(stmt: Statement) -> str:
    q = quote
    if isinstance(stmt, ActorDecl):
        return f"actor {q(stmt.name)} {stmt.kind}"
    if isinstance(stmt, RelationDecl):
        flags = "".join([" reciprocal" if stmt.reciprocal else "", " public" if stmt.public else ""])
        return f"relation {q(stmt.owner)}.{q(stmt.name)}{flags}"
    if isinstance(stmt, Grant):
        return f"grant {q(stmt.owner)}.{q(stmt.relation)} {stmt.action} {stmt.object_class}"
    if isinstance(stmt, Stronger):
        return f"stronger {q(stmt.owner)}.{q(stmt.stronger)} > {q(stmt.weaker_owner)}.{q(stmt.weaker)}"
    if isinstance(stmt, TieDecl):
        return f"tie {q(stmt.sender)} -> {q(stmt.receiver)} : {q(stmt.relation)}"
    if isinstance(stmt, Accept):
        return f"accept {q(stmt.receiver)} {q(stmt.sender)}.{q(stmt.relation)} with {q(stmt.reverse_relation)}"
    if isinstance(stmt, Check):
        verdict = "allow" if stmt.expect_allow else "deny"
        return f"check {q(stmt.agent)} {stmt.action} {stmt.object_class} on {q(stmt.owner)} expect {verdict}"
    if isinstance(stmt, DefaultsBlock):
        return f"defaults {stmt.kind}"
    raise TypeError(f"not a statement: {stmt!r}")


def format_statements(statements: list[Statement]) -> str:
    return "".join(format_statement(s) + "\n" for s in statements)


# -------------------------------------------------------------- elaboration


@dataclass(frozen=True)
class CheckResult:
    line: int
    statement: Check
    decision: authz.Decision
    passed: bool

    def to_dict(self) -> dict:
        return {
            "line": self.line,
            "check": format_statement(self.statement),
            "allowed": self.decision.allowed,
            "reason": self.decision.reason.value,
            "passed": self.passed,
        }


@dataclass
class ScenarioReport:
    statements: int = 0
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(1 for c in self.checks if c.passed)

    @property
    def failed(self) -> int:
        return len(self.checks) - self.passed

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def summary(self) -> str:
        return f"{self.passed}/{len(self.checks)} checks passed"

    def to_dict(self) -> dict:
        return {
            "statements": self.statements,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
            "failed": self.failed,
        }


class _Scope:
    def __init__(self, store: Store):
        self.store = store
        self.declared: dict[str, ActorId] = {}

    def actor(self, name: str, line: int) -> ActorId:
        if name in self.declared:
            return self.declared[name]
        found = self.store.find_actors(name)
        if len(found) == 1:
            return found[0].id
        if not found:
            raise UnresolvedName(line, f"unknown actor {name!r}")
        raise UnresolvedName(line, f"actor name {name!r} is ambiguous in the target store")

    def relation(self, owner: str, name: str, line: int) -> str:
        rel = self.store.relation_named(self.actor(owner, line), name)
        if rel is None:
            raise UnresolvedName(line, f"{owner!r} owns no relation {name!r}")
        return rel.id


def _run(stmt: Statement, scope: _Scope, report: ScenarioReport) -> None:
    store, ln = scope.store, stmt.line
    if isinstance(stmt, ActorDecl):
        scope.declared[stmt.name] = store.create_actor(stmt.name, stmt.kind)
    elif isinstance(stmt, RelationDecl):
        store.define_relation(scope.actor(stmt.owner, ln), stmt.name, stmt.reciprocal, stmt.public)
    elif isinstance(stmt, Grant):
        owner = scope.actor(stmt.owner, ln)
        rel = scope.relation(stmt.owner, stmt.relation, ln)
        store.grant_permission(owner, rel, Permission(stmt.action, stmt.object_class))
    elif isinstance(stmt, Stronger):
        owner = scope.actor(stmt.owner, ln)
        strong = scope.relation(stmt.owner, stmt.stronger, ln)
        weak = scope.relation(stmt.weaker_owner, stmt.weaker, ln)
        store.add_strength_edge(owner, strong, weak)
    elif isinstance(stmt, TieDecl):
        sender = scope.actor(stmt.sender, ln)
        store.add_tie(sender, scope.relation(stmt.sender, stmt.relation, ln), scope.actor(stmt.receiver, ln))
    elif isinstance(stmt, Accept):
        receiver = scope.actor(stmt.receiver, ln)
        sender = scope.actor(stmt.sender, ln)
        rel = scope.relation(stmt.sender, stmt.relation, ln)
        tie = store.live_tie(sender, rel, receiver)
        if tie is None or tie.state is not TieState.PENDING:
            raise UnresolvedName(ln, f"no pending tie {stmt.sender}.{stmt.relation} -> {stmt.receiver}")
        store.accept_tie(receiver, tie.id, scope.relation(stmt.receiver, stmt.reverse_relation, ln))
    elif isinstance(stmt, Check):
        decision = authz.check(
            store, scope.actor(stmt.agent, ln), stmt.action, stmt.object_class, scope.actor(stmt.owner, ln)
        )
        report.checks.append(CheckResult(ln, stmt, decision, decision.allowed == stmt.expect_allow))
    else:
        raise ModelError(ln, f"{type(stmt).__name__} is only valid in catalog files")


def elaborate(statements: list[Statement], target: Store) -> ScenarioReport:
    """Execute statements in order against ``target``.

    Not transactional: when a statement fails, everything before it stays
    applied and the error carries the offending line.
    """
    report = ScenarioReport()
    scope = _Scope(target)
    with target.lock:
        for stmt in statements:
            try:
                _run(stmt, scope, report)
            except ElaborationError:
                raise
            except errors.TierbacError as exc:
                raise ModelError(stmt.line, f"{exc.tag}: {exc.detail}", exc) from exc
            report.statements += 1
    return report


def run_source(source: str, target: Store) -> ScenarioReport:
    return elaborate(parse(source), target)
