"""Meta-DSL program representation and the two single-valued semantics.

A program is `def synthfunc(x) = S` where S is an expression, a let binding,
or a sequence of those.  Symbolic applications carry a domain op name; neural
applications name a registered perception function.  Function-valued
arguments (the `inc` in `fold inc 0 ...`) are zero-argument symbolic nodes
(`fnref:<name>`) whose runtime value is an FnVal; they count as one AST node.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .domain import DomainPlugin, EvalCtx
from .values import PerceptRef, Value, project_value
from . import feedback as fb


class DslError(Exception):
    pass


class UnknownSymbol(DslError):
    pass


class IllTypedApplication(DslError):
    pass


class ScopeError(DslError):
    pass


class OracleUnavailable(DslError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class SymApp:
    op: str
    args: tuple = ()


@dataclass(frozen=True)
class NeuralApp:
    fn: str
    arg: "Expr"


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


Expr = Union[Const, Var, SymApp, NeuralApp, If]


@dataclass(frozen=True)
class Let:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    rest: "Stmt"


Stmt = Union[Expr, Let, Seq]


def children(node) -> tuple:
    if isinstance(node, (Const, Var)):
        return ()
    if isinstance(node, SymApp):
        return node.args
    if isinstance(node, NeuralApp):
        return (node.arg,)
    if isinstance(node, If):
        return (node.cond, node.then, node.orelse)
    if isinstance(node, Let):
        return (node.expr,)
    if isinstance(node, Seq):
        return (node.first, node.rest)
    raise TypeError(f"not an AST node: {node!r}")


def _fresh_copy(node):
    """Deep-rebuild so every node is a distinct object (enumerators share
    subtrees; annotation maps key on object identity)."""
    kids = [_fresh_copy(c) for c in children(node)]
    if isinstance(node, Const):
        return Const(node.value)
    if isinstance(node, Var):
        return Var(node.name)
    if isinstance(node, SymApp):
        return SymApp(node.op, tuple(kids))
    if isinstance(node, NeuralApp):
        return NeuralApp(node.fn, kids[0])
    if isinstance(node, If):
        return If(kids[0], kids[1], kids[2])
    if isinstance(node, Let):
        return Let(node.name, kids[0])
    if isinstance(node, Seq):
        return Seq(kids[0], kids[1])
    raise TypeError(node)


class Program:
    """Immutable program with stable per-node ids assigned in pre-order."""

    def __init__(self, body: Stmt, param: str = "x"):
        self.param = param
        self.body = _fresh_copy(body)
        self.nodes: list = []
        self._ids: dict[int, int] = {}
        for node in self._preorder(self.body):
            self._ids[id(node)] = len(self.nodes)
            self.nodes.append(node)
        self._check_scopes(self.body, {param})
        self._key: Optional[str] = None

    @staticmethod
    def _preorder(node) -> Iterator:
        stack = [node]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(children(n)))

    def _check_scopes(self, node, bound: set):
        if isinstance(node, Var):
            if node.name not in bound:
                raise ScopeError(f"unbound variable {node.name}")
        elif isinstance(node, Seq):
            inner = set(bound)
            stmt = node
            while isinstance(stmt, Seq):
                if isinstance(stmt.first, Let):
                    if stmt.first.name in inner:
                        raise ScopeError(f"shadowing let binding {stmt.first.name}")
                    self._check_scopes(stmt.first.expr, inner)
                    inner.add(stmt.first.name)
                else:
                    self._check_scopes(stmt.first, inner)
                stmt = stmt.rest
            self._check_scopes(stmt, inner)
        elif isinstance(node, Let):
            self._check_scopes(node.expr, bound)
        else:
            for c in children(node):
                self._check_scopes(c, bound)

    def node_id(self, node) -> int:
        return self._ids[id(node)]

    @property
    def size(self) -> int:
        return len(self.nodes)

    def key(self) -> str:
        if self._key is None:
            self._key = to_sexpr(self)
        return self._key

    def __repr__(self):
        return f"Program({self.key()})"

    def __eq__(self, other):
        return isinstance(other, Program) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


def ast_size(p: Program) -> int:
    return p.size


def neural_fns_used(p: Program) -> set[str]:
    used = set()
    for n in p.nodes:
        if isinstance(n, NeuralApp):
            used.add(n.fn)
        elif isinstance(n, SymApp) and n.op.startswith("fnref:"):
            name = n.op.split(":", 1)[1]
            if name in _NEURAL_FNREFS:
                used.add(name)
    return used


# ---------------------------------------------------------------------------
# s-expression form (canonical, lossless)

_ATOM = re.compile(r"[^\s()]+")

# names that print bare (or with @ for neural) and parse back to fnref nodes
_FNREF_NAMES: set[str] = set()
_NEURAL_FNREFS: set[str] = set()


def register_fnref_names(names=(), neural=()):
    _FNREF_NAMES.update(names)
    _NEURAL_FNREFS.update(neural)


def fnref(name: str) -> SymApp:
    return SymApp(f"fnref:{name}")


def _node_sexpr(node) -> str:
    if isinstance(node, Const):
        v = node.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return str(v)
        if isinstance(v, PerceptRef):
            return f"(token {v.token})"
        raise DslError(f"unserializable constant {v!r}")
    if isinstance(node, Var):
        return node.name
    if isinstance(node, SymApp):
        if node.op.startswith("fnref:") and not node.args:
            name = node.op.split(":", 1)[1]
            return f"@{name}" if name in _NEURAL_FNREFS else name
        parts = [node.op] + [_node_sexpr(a) for a in node.args]
        return "(" + " ".join(parts) + ")"
    if isinstance(node, NeuralApp):
        return f"(@{node.fn} {_node_sexpr(node.arg)})"
    if isinstance(node, If):
        return f"(if {_node_sexpr(node.cond)} {_node_sexpr(node.then)} {_node_sexpr(node.orelse)})"
    if isinstance(node, Let):
        return f"(let {node.name} {_node_sexpr(node.expr)})"
    if isinstance(node, Seq):
        return f"(seq {_node_sexpr(node.first)} {_node_sexpr(node.rest)})"
    raise TypeError(node)


def to_sexpr(p: Program) -> str:
    return f"(def synthfunc ({p.param}) {_node_sexpr(p.body)})"


def _tokenize(text: str) -> list[str]:
    out, i = [], 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            out.append(c)
            i += 1
        else:
            m = _ATOM.match(text, i)
            out.append(m.group(0))
            i = m.end()
    return out


def _parse_tokens(toks: list[str], pos: int):
    t = toks[pos]
    if t == "(":
        head = toks[pos + 1]
        args, pos = [], pos + 2
        while toks[pos] != ")":
            node, pos = _parse_tokens(toks, pos)
            args.append(node)
        pos += 1
        if head == "token":
            return Const(PerceptRef(args[0].name)), pos
        if head == "if":
            return If(*args), pos
        if head == "let":
            return Let(args[0].name, args[1]), pos
        if head == "seq":
            return Seq(args[0], args[1]), pos
        if head.startswith("@"):
            return NeuralApp(head[1:], args[0]), pos
        return SymApp(head, tuple(args)), pos
    pos += 1
    if re.fullmatch(r"-?\d+", t):
        return Const(int(t)), pos
    if t == "true":
        return Const(True), pos
    if t == "false":
        return Const(False), pos
    if t.startswith("@") and t[1:] in _NEURAL_FNREFS:
        return fnref(t[1:]), pos
    if t in _FNREF_NAMES:
        return fnref(t), pos
    return Var(t), pos


def parse_expr(text: str):
    """Parse a bare expression fragment (no program wrapper, no scope check)."""
    node, _ = _parse_tokens(_tokenize(text), 0)
    return node


def from_sexpr(text: str) -> Program:
    toks = _tokenize(text)
    if toks[:2] == ["(", "def"]:
        param = toks[4]
        body, _ = _parse_tokens(toks, 6)
        return Program(body, param=param)
    body, _ = _parse_tokens(toks, 0)
    return Program(body, param="l")


# ---------------------------------------------------------------------------
# Single-valued semantics

def _eval_single(node, env: dict, ctx: EvalCtx):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, NeuralApp):
        tok = _eval_single(node.arg, env, ctx)
        if not isinstance(tok, PerceptRef):
            raise IllTypedApplication(f"neural call on non-perception value {tok!r}")
        outs = ctx.neural_outcomes(node.fn, tok)
        return outs[0][0]
    if isinstance(node, If):
        c = _eval_single(node.cond, env, ctx)
        if not isinstance(c, bool):
            raise IllTypedApplication("non-boolean condition")
        return _eval_single(node.then if c else node.orelse, env, ctx)
    if isinstance(node, SymApp):
        if node.op.startswith("fnref:"):
            return ctx.plugin.fn_value(node.op.split(":", 1)[1])
        args = [_eval_single(a, env, ctx) for a in node.args]
        try:
            outs = ctx.plugin.apply_op(node.op, args, ctx)
        except KeyError:
            raise UnknownSymbol(node.op) from None
        assert len(outs) == 1, f"op {node.op} produced a set under single-valued semantics"
        return outs[0][0]
    raise TypeError(node)


def eval_body_single(body: Stmt, env: dict, ctx: EvalCtx):
    env = dict(env)
    stmt = body
    while isinstance(stmt, Seq):
        if isinstance(stmt.first, Let):
            env[stmt.first.name] = _eval_single(stmt.first.expr, env, ctx)
        else:
            _eval_single(stmt.first, env, ctx)
        stmt = stmt.rest
    if isinstance(stmt, Let):
        return _eval_single(stmt.expr, env, ctx)
    return _eval_single(stmt, env, ctx)


def eval_standard(p: Program, dom_input, plugin: DomainPlugin, predictor) -> Value:
    """Evaluation semantics: every neural call yields the model's top-1 label."""

    def resolver(fn, tok):
        v = plugin.neural_single(fn, tok, lambda f, t: predictor.top1(f, t))
        return [(v, fb.EMPTY)]

    ctx = EvalCtx(plugin, dom_input, fb.FeedbackStore(), resolver=resolver, predictor=predictor)
    env = {p.param: plugin.input_value(dom_input)}
    return project_value(eval_body_single(p.body, env, ctx))


def eval_ground_truth(p: Program, dom_input, plugin: DomainPlugin, oracle) -> Value:
    """Ground-truth semantics: every neural call consults the oracle."""

    def atomic(fn, tok):
        lbl = oracle.label(fn, tok)
        if lbl is None:
            raise OracleUnavailable(f"no label for {fn}({tok.token})")
        return lbl

    def resolver(fn, tok):
        return [(plugin.neural_single(fn, tok, atomic), fb.EMPTY)]

    ctx = EvalCtx(plugin, dom_input, fb.FeedbackStore(), resolver=resolver)
    env = {p.param: plugin.input_value(dom_input)}
    return project_value(eval_body_single(p.body, env, ctx))
