"""Reference implementation of the constrained conformal semantics.

Structural recursion carrying sets of (value, constraint) outcomes, with a
satisfiability filter at every neural and symbolic step and constraint
projection at the program boundary.  Exponential in prediction-set sizes by
design: this module is the oracle the optimized engine is verified against,
so it stays a direct transcription of the semantics rules and shares no
evaluation core with the production path.
"""
from __future__ import annotations

from typing import Optional

from . import feedback as fb
from .domain import DomainPlugin, EvalCtx
from .dsl import Const, If, Let, NeuralApp, Program, Seq, SymApp, Var
from .values import PerceptRef, project_value


def _dedup(outcomes):
    return list(dict.fromkeys(outcomes))


def _eval_delta(node, env: dict, ctx: EvalCtx) -> list:
    """One node's outcome set under the constrained conformal rules."""
    if isinstance(node, Const):
        return [(node.value, fb.EMPTY)]

    if isinstance(node, Var):
        return env[node.name]

    if isinstance(node, SymApp) and node.op.startswith("fnref:"):
        return [(ctx.plugin.fn_value(node.op.split(":", 1)[1]), fb.EMPTY)]

    if isinstance(node, NeuralApp):
        out = []
        for tok, phi in _eval_delta(node.arg, env, ctx):
            assert isinstance(tok, PerceptRef)
            for label, psi in ctx.neural_outcomes(node.fn, tok):
                c = fb.conjoin(phi, psi)
                if c is not fb.UNSAT and fb.sat(c, ctx.store):
                    out.append((label, c))
        return _dedup(out)

    if isinstance(node, If):
        out = []
        for b, phi1 in _eval_delta(node.cond, env, ctx):
            for vt, phi2 in _eval_delta(node.then, env, ctx):
                for ve, phi3 in _eval_delta(node.orelse, env, ctx):
                    c = fb.conjoin(fb.conjoin(phi1, phi2), phi3)
                    if c is not fb.UNSAT and fb.sat(c, ctx.store):
                        out.append((vt if b else ve, c))
        return _dedup(out)

    if isinstance(node, SymApp):
        deltas = [_eval_delta(a, env, ctx) for a in node.args]
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
                if merged is not fb.UNSAT and fb.sat(merged, ctx.store):
                    out.append((v, merged))
        return _dedup(out)

    raise TypeError(node)


def eval_body_delta(body, env: dict, ctx: EvalCtx) -> list:
    env = dict(env)
    stmt = body
    while isinstance(stmt, Seq):
        if isinstance(stmt.first, Let):
            env[stmt.first.name] = _eval_delta(stmt.first.expr, env, ctx)
        else:
            _eval_delta(stmt.first, env, ctx)
        stmt = stmt.rest
    if isinstance(stmt, Let):
        return _eval_delta(stmt.expr, env, ctx)
    return _eval_delta(stmt, env, ctx)


def eval_constrained_ref(p: Program, store: fb.FeedbackStore, dom_input,
                         plugin: DomainPlugin, predictor) -> frozenset:
    """Exactly the output set of the constrained conformal semantics."""
    ctx = EvalCtx(plugin, dom_input, store, predictor=predictor)
    env = {p.param: [(plugin.input_value(dom_input), fb.EMPTY)]}
    delta = eval_body_delta(p.body, env, ctx)
    return frozenset(project_value(v) for v, _ in delta)


def is_consistent(p: Program, store: fb.FeedbackStore, plugin: DomainPlugin,
                  predictor, eval_fn=None) -> bool:
    """True iff every IO example's output is in the conformal output set."""
    evaluate = eval_fn or (lambda prog, inp: eval_constrained_ref(prog, store, inp, plugin, predictor))
    for _, dom_input, expected in store.io_examples:
        if expected not in evaluate(p, dom_input):
            return False
    return True
