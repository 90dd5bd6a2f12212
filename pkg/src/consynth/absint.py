"""The practical constrained-conformal-evaluation engine.

Pipeline: forward abstract interpretation annotates every AST node, an
optional meet of the root with the expected output, backward abstract
interpretation tightens the annotations with inverse transformers, and a
final bottom-up concrete pass discards any outcome whose value falls outside
its node's concretization.  Bounded conformal evaluation (BCE) reuses the
concrete pass with per-node sampling instead of abstract filtering.
"""
from __future__ import annotations

import math
import random
from typing import Optional

from . import feedback as fb
from .domain import DomainPlugin, EvalCtx
from .dsl import Const, If, Let, NeuralApp, Program, Seq, SymApp, Var, children
from .values import PerceptRef, project_value, sorted_values, value_key


class EmptyAbstraction(Exception):
    """Some annotation became bottom: the program cannot reach the expected
    output under the current feedback."""


class Top:
    """Universal top: imposes no constraint; meet is identity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TOP"


TOP = Top()


class AbstractContext:
    """Per-(input, store) abstract domain interface.

    Abstract values are domain-specific; TOP is handled here.  Inverse
    transformers return None when they have nothing to say about a child.
    """

    def alpha(self, values) -> object:
        raise NotImplementedError

    def alpha_input(self, dom_input) -> object:
        """Abstract value bound to the program parameter."""
        raise NotImplementedError

    def member(self, value, a) -> bool:
        raise NotImplementedError

    def meet(self, a, b) -> object:
        """Raises EmptyAbstraction when the meet is bottom."""
        raise NotImplementedError

    def forward_op(self, op: str, child_abs: list) -> object:
        raise NotImplementedError

    def forward_neural(self, fn: str, arg_abs) -> object:
        raise NotImplementedError

    def forward_if(self, cond_abs, then_abs, else_abs) -> object:
        return TOP

    def forward_const(self, value) -> object:
        return self.alpha([value])

    def inverse_op(self, op: str, i: int, out_abs, child_abs: list) -> Optional[object]:
        return None

    def inverse_neural(self, fn: str, out_abs, arg_abs) -> Optional[object]:
        return None

    # -- shared helpers -----------------------------------------------------
    def meet_or_top(self, a, b):
        if a is TOP:
            return b
        if b is TOP:
            return a
        return self.meet(a, b)

    def member_or_top(self, value, a) -> bool:
        return True if a is TOP else self.member(value, a)


# ---------------------------------------------------------------------------
# ForwardAI


class NodeAnnotations:
    """theta: node id -> abstract value, plus the program's result node."""

    def __init__(self, program: Program, theta: dict, root_node):
        self.program = program
        self.theta = theta
        self.root_node = root_node

    def __getitem__(self, node):
        return self.theta[self.program.node_id(node)]

    def __setitem__(self, node, value):
        self.theta[self.program.node_id(node)] = value

    def by_id(self, nid: int):
        return self.theta[nid]


def _forward_node(node, env: dict, ctx: EvalCtx, actx: AbstractContext, theta: dict, p: Program):
    if isinstance(node, Const):
        a = actx.forward_const(node.value)
    elif isinstance(node, Var):
        a = env[node.name]
    elif isinstance(node, NeuralApp):
        arg = _forward_node(node.arg, env, ctx, actx, theta, p)
        a = actx.forward_neural(node.fn, arg)
    elif isinstance(node, If):
        c = _forward_node(node.cond, env, ctx, actx, theta, p)
        t = _forward_node(node.then, env, ctx, actx, theta, p)
        e = _forward_node(node.orelse, env, ctx, actx, theta, p)
        a = actx.forward_if(c, t, e)
    elif isinstance(node, SymApp):
        kids = [_forward_node(k, env, ctx, actx, theta, p) for k in node.args]
        a = actx.forward_op(node.op, kids)
    else:
        raise TypeError(node)
    nid = p.node_id(node)
    prior = theta.get(nid)
    if prior is not None:
        a = actx.meet_or_top(prior, a)
    theta[nid] = a
    return a


def result_node(p: Program):
    """The node whose value is the program's output (end of the let chain)."""
    stmt = p.body
    while isinstance(stmt, Seq):
        stmt = stmt.rest
    if isinstance(stmt, Let):
        return stmt.expr
    return stmt


def forward_ai(p: Program, store: fb.FeedbackStore, dom_input,
               plugin: DomainPlugin, predictor,
               theta: Optional[dict] = None) -> NodeAnnotations:
    """Annotate every node with its forward abstract value.  Feedback enters
    through the constrained prediction sets at neural leaves; when rerun with
    an existing theta, new values are met with the previous ones."""
    ctx = EvalCtx(plugin, dom_input, store, predictor=predictor)
    actx = plugin.abstract_context(dom_input, ctx)
    theta = {} if theta is None else theta
    env = {p.param: actx.alpha_input(dom_input)}
    stmt = p.body
    while isinstance(stmt, Seq):
        if isinstance(stmt.first, Let):
            val = _forward_node(stmt.first.expr, env, ctx, actx, theta, p)
            theta[p.node_id(stmt.first)] = val
            env[stmt.first.name] = val
        else:
            theta[p.node_id(stmt.first)] = _forward_node(stmt.first, env, ctx, actx, theta, p)
        theta.setdefault(p.node_id(stmt), TOP)
        stmt = stmt.rest
    if isinstance(stmt, Let):
        val = _forward_node(stmt.expr, env, ctx, actx, theta, p)
        theta[p.node_id(stmt)] = val
    else:
        _forward_node(stmt, env, ctx, actx, theta, p)
    # Seq spine nodes need some annotation for completeness
    for n in p.nodes:
        theta.setdefault(p.node_id(n), TOP)
    return NodeAnnotations(p, theta, result_node(p))


# ---------------------------------------------------------------------------
# BackwardAI


def _backward_node(node, ann: NodeAnnotations, actx: AbstractContext, p: Program):
    kids = None
    if isinstance(node, SymApp) and not node.op.startswith("fnref:"):
        kids = list(node.args)
        for i, child in enumerate(kids):
            chi = actx.inverse_op(node.op, i, ann[node], [ann[k] for k in kids])
            if chi is not None:
                ann[child] = actx.meet_or_top(ann[child], chi)
    elif isinstance(node, NeuralApp):
        chi = actx.inverse_neural(node.fn, ann[node], ann[node.arg])
        if chi is not None:
            ann[node.arg] = actx.meet_or_top(ann[node.arg], chi)
    elif isinstance(node, Let):
        ann[node.expr] = actx.meet_or_top(ann[node.expr], ann[node])
    for child in children(node):
        _backward_node(child, ann, actx, p)


def backward_ai(p: Program, ann: NodeAnnotations, dom_input, store: fb.FeedbackStore,
                plugin: DomainPlugin, predictor) -> NodeAnnotations:
    """Single top-down pass of inverse transformers and meets (per the
    algorithm figure); raises EmptyAbstraction if any annotation bottoms."""
    ctx = EvalCtx(plugin, dom_input, store, predictor=predictor)
    actx = plugin.abstract_context(dom_input, ctx)
    stmt = p.body
    while isinstance(stmt, Seq):
        _backward_node(stmt.first, ann, actx, p)
        stmt = stmt.rest
    _backward_node(stmt, ann, actx, p)
    return ann


# ---------------------------------------------------------------------------
# EvalConsistent (+ BCE sampling)


def _cap_outcomes(outcomes: list, bound: Optional[int], rng: Optional[random.Random]) -> list:
    if bound is None or len(outcomes) <= bound:
        return outcomes
    ordered = sorted(outcomes, key=lambda oc: (value_key(oc[0]), sorted(oc[1])))
    return rng.sample(ordered, bound)


class _Bounder:
    """BCE cardinality bound: min(k, ceil(n * k'))."""

    def __init__(self, k: Optional[int], kprime: float, rng: random.Random):
        self.k = k
        self.kprime = kprime
        self.rng = rng

    def apply(self, outcomes: list) -> list:
        if self.k is None and self.kprime >= 1.0:
            return outcomes
        n = len(outcomes)
        bound = math.ceil(n * self.kprime)
        if self.k is not None:
            bound = min(self.k, bound)
        bound = max(bound, 1)
        return _cap_outcomes(outcomes, bound, self.rng)


def _dedup(outcomes):
    return list(dict.fromkeys(outcomes))


def _consistent_node(node, env, ctx: EvalCtx, ann: Optional[NodeAnnotations],
                     actx: Optional[AbstractContext], bounder: Optional[_Bounder]):
    def admit(value) -> bool:
        if ann is None:
            return True
        return actx.member_or_top(value, ann[node])

    if isinstance(node, Const):
        out = [(node.value, fb.EMPTY)] if admit(node.value) else []
    elif isinstance(node, Var):
        out = [oc for oc in env[node.name] if admit(oc[0])]
    elif isinstance(node, SymApp) and node.op.startswith("fnref:"):
        out = [(ctx.plugin.fn_value(node.op.split(":", 1)[1]), fb.EMPTY)]
    elif isinstance(node, NeuralApp):
        out = []
        for tok, phi in _consistent_node(node.arg, env, ctx, ann, actx, bounder):
            for label, psi in ctx.neural_outcomes(node.fn, tok):
                c = fb.conjoin(phi, psi)
                if c is not fb.UNSAT and fb.sat(c, ctx.store) and admit(label):
                    out.append((label, c))
        out = _dedup(out)
        if bounder is not None:
            out = bounder.apply(out)
    elif isinstance(node, If):
        out = []
        for b, phi1 in _consistent_node(node.cond, env, ctx, ann, actx, bounder):
            for vt, phi2 in _consistent_node(node.then, env, ctx, ann, actx, bounder):
                for ve, phi3 in _consistent_node(node.orelse, env, ctx, ann, actx, bounder):
                    c = fb.conjoin(fb.conjoin(phi1, phi2), phi3)
                    v = vt if b else ve
                    if c is not fb.UNSAT and fb.sat(c, ctx.store) and admit(v):
                        out.append((v, c))
        out = _dedup(out)
        if bounder is not None:
            out = bounder.apply(out)
    elif isinstance(node, SymApp):
        deltas = [_consistent_node(a, env, ctx, ann, actx, bounder) for a in node.args]
        combos = [((), fb.EMPTY)]
        for delta in deltas:
            nxt = []
            for vals, c in combos:
                for v, phi in delta:
                    merged = fb.conjoin(c, phi)
                    if merged is not fb.UNSAT and fb.sat(merged, ctx.store):
                        nxt.append((vals + (v,), merged))
            combos = nxt
        out = []
        for vals, c in combos:
            for v, psi in ctx.plugin.apply_op(node.op, list(vals), ctx):
                merged = fb.conjoin(c, psi)
                if merged is not fb.UNSAT and fb.sat(merged, ctx.store) and admit(v):
                    out.append((v, merged))
        out = _dedup(out)
        if bounder is not None:
            out = bounder.apply(out)
    else:
        raise TypeError(node)
    return out


def eval_consistent(p: Program, ann: Optional[NodeAnnotations], store: fb.FeedbackStore,
                    dom_input, plugin: DomainPlugin, predictor,
                    bounder: Optional[_Bounder] = None) -> list:
    """Bottom-up outcome propagation filtered by the annotations (and/or
    down-sampled by the BCE bounder).  Returns the root outcome list."""
    ctx = EvalCtx(plugin, dom_input, store, predictor=predictor)
    actx = plugin.abstract_context(dom_input, ctx) if ann is not None else None
    env = {p.param: [(plugin.input_value(dom_input), fb.EMPTY)]}
    stmt = p.body
    while isinstance(stmt, Seq):
        if isinstance(stmt.first, Let):
            env = dict(env)
            env[stmt.first.name] = _consistent_node(stmt.first.expr, env, ctx, ann, actx, bounder)
        else:
            _consistent_node(stmt.first, env, ctx, ann, actx, bounder)
        stmt = stmt.rest
    node = stmt.expr if isinstance(stmt, Let) else stmt
    return _consistent_node(node, env, ctx, ann, actx, bounder)


_UNSET = object()


def cce(p: Program, store: fb.FeedbackStore, dom_input, plugin: DomainPlugin,
        predictor, expected=_UNSET, rounds: int = 1) -> frozenset:
    """Constrained conformal evaluation via bidirectional abstract
    interpretation.

    Without `expected` this equals eval_constrained_ref exactly.  With
    `expected`, the root annotation is met with alpha({expected}) before the
    backward pass (the semantics' behavior when the feedback carries an IO
    example for this input); the result is then only useful for membership
    checks of `expected`.
    """
    try:
        ann = forward_ai(p, store, dom_input, plugin, predictor)
        ctx = EvalCtx(plugin, dom_input, store, predictor=predictor)
        actx = plugin.abstract_context(dom_input, ctx)
        if expected is not _UNSET:
            ann[ann.root_node] = actx.meet_or_top(ann[ann.root_node], actx.alpha([expected]))
        backward_ai(p, ann, dom_input, store, plugin, predictor)
        for _ in range(rounds - 1):
            forward_ai(p, store, dom_input, plugin, predictor, theta=ann.theta)
            backward_ai(p, ann, dom_input, store, plugin, predictor)
    except EmptyAbstraction:
        return frozenset()
    delta = eval_consistent(p, ann, store, dom_input, plugin, predictor)
    return frozenset(project_value(v) for v, _ in delta)


def cce_plain(p: Program, store: fb.FeedbackStore, dom_input, plugin, predictor) -> frozenset:
    """The no-abstract-interpretation ablation: raw rule recursion."""
    delta = eval_consistent(p, None, store, dom_input, plugin, predictor)
    return frozenset(project_value(v) for v, _ in delta)


def bce(p: Program, store: fb.FeedbackStore, dom_input, plugin: DomainPlugin,
        predictor, k: Optional[int], kprime: float = 1.0,
        rng_seed: int = 0) -> frozenset:
    """Bounded conformal evaluation: the rule recursion with intermediate
    outcome sets down-sampled to min(k, ceil(n*k')).  Always a subset of the
    cce result; equal to it when k is None and k' = 1."""
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    if not (0 < kprime <= 1):
        raise ValueError("k' must be in (0, 1]")
    bounder = _Bounder(k, kprime, random.Random(rng_seed))
    delta = eval_consistent(p, None, store, dom_input, plugin, predictor, bounder=bounder)
    return frozenset(project_value(v) for v, _ in delta)


def bce_consistent(p: Program, store: fb.FeedbackStore, plugin: DomainPlugin,
                   predictor, k: Optional[int], kprime: float = 1.0,
                   rng_seed: int = 0) -> bool:
    for _, dom_input, expected in store.io_examples:
        if expected not in bce(p, store, dom_input, plugin, predictor, k, kprime, rng_seed):
            return False
    return True
