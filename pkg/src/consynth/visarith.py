"""Visual-arithmetic list domain: digit lists processed with map/filter/fold.

Concrete lists inside the engine are length-preserving masked lists (one slot
per input element, filtering marks slots absent).  The abstract domain pairs
an integer interval with a three-valued presence flag per slot; scalars are
plain intervals.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Optional

from . import feedback as fb
from .absint import TOP, AbstractContext, EmptyAbstraction
from .conformal import PerceptionInput
from .domain import DomainPlugin, EvalCtx, NeuralFn
from .dsl import Const, NeuralApp, Program, SymApp, Var, fnref, register_fnref_names
from .values import FnVal, PerceptRef, Value, masked

DIGIT_FN = "toDigit"
COMPARATORS = ("<", "<=", ">", ">=", "=")

register_fnref_names(names=("inc", "plus", "product", "max"), neural=(DIGIT_FN,))


@dataclass(frozen=True)
class DigitListInput:
    """A nonempty list of digit tokens."""

    id: str
    elements: tuple  # of PerceptionInput

    def __post_init__(self):
        assert self.elements, "digit lists are nonempty"


# presence: True / False / None (unknown)
def _and3(a, b):
    if a is False or b is False:
        return False
    if a is True and b is True:
        return True
    return None


def _presence_meet(a, b):
    if a is b or a == b:
        return a
    if a is None:
        return b
    if b is None:
        return a
    raise EmptyAbstraction("presence True met with False")


# abstract values: ("int", lo, hi) | ("list", ((lo, hi, z), ...)) |
# ("fn", tag, name, arg_abs) | PerceptRef | tuple of PerceptRef
def interval(lo: int, hi: int):
    return ("int", lo, hi)


def point(v: int):
    return ("int", v, v)


def _is_int(a):
    return isinstance(a, tuple) and len(a) == 3 and a[0] == "int"


def _is_list(a):
    return isinstance(a, tuple) and len(a) == 2 and a[0] == "list"


def _is_fn(a):
    return isinstance(a, tuple) and a and a[0] == "fn"


_PRIMS = {"inc", "plus", "product", "max"}


def _fold_step(f: str, acc: int, x: int) -> int:
    if f == "inc":
        return acc + 1
    if f == "plus":
        return acc + x
    if f == "product":
        return acc * x
    if f == "max":
        return max(acc, x)
    raise KeyError(f)


def _curry_apply(f: str, x: int, c: int) -> int:
    if f == "plus":
        return x + c
    if f == "prod":
        return x * c
    if f == "max":
        return max(x, c)
    raise KeyError(f)


def _cmp_apply(op: str, x: int, c: int) -> bool:
    if op == "<":
        return x < c
    if op == "<=":
        return x <= c
    if op == ">":
        return x > c
    if op == ">=":
        return x >= c
    if op == "=":
        return x == c
    raise KeyError(op)


class VisArithPlugin(DomainPlugin):
    name = "visarith"

    def __init__(self):
        super().__init__()
        self.neural = {DIGIT_FN: NeuralFn(DIGIT_FN, tuple(range(10)))}
        self.ops = {
            "map": _op_map,
            "filter": _op_filter,
            "fold": _op_fold,
            "head": _op_head,
            "tail": _op_tail,
            "plus2": _op_plus2,
            "mult2": _op_mult2,
        }
        for cmp in COMPARATORS:
            self.ops[f"pred:{cmp}"] = _make_pred(cmp)
        for f in ("plus", "prod", "max"):
            self.ops[f"curry:{f}"] = _make_curry(f)

    def fn_value(self, name: str) -> FnVal:
        if name == DIGIT_FN:
            return FnVal("neural", DIGIT_FN)
        if name in _PRIMS:
            return FnVal("prim", name)
        raise KeyError(name)

    def apply_fn_concrete(self, f: FnVal, arg: Value) -> Value:
        if f.tag == "curry":
            return _curry_apply(f.name, arg, f.arg)
        if f.tag == "pred":
            return _cmp_apply(f.name, arg, f.arg)
        raise TypeError(f)

    def input_value(self, dom_input: DigitListInput) -> Value:
        return tuple(e.ref for e in dom_input.elements)

    def input_tokens(self, dom_input: DigitListInput) -> frozenset:
        return frozenset(e.token for e in dom_input.elements)

    def atomic_questions(self, dom_input: DigitListInput):
        return [(DIGIT_FN, e.token) for e in dom_input.elements]

    def input_id(self, dom_input: DigitListInput) -> str:
        return dom_input.id

    def abstract_context(self, dom_input, ctx: EvalCtx) -> "VisArithAbs":
        return VisArithAbs(ctx)

    def enumerate_programs(self, grammar_config, max_size: int):
        return enumerate_grammar(grammar_config, max_size)

    def render_question(self, question, dom_input) -> dict:
        import base64

        if question.target == "synthfunc":
            return {
                "kind": "io",
                "input_id": dom_input.id,
                "elements": [
                    {"token": e.token, "image": "data:image/png;base64," + base64.b64encode(e.render_payload).decode()}
                    for e in dom_input.elements
                ],
                "answer_schema": "integer",
            }
        tok = question.key
        elem = next(e for e in dom_input.elements if e.token == tok)
        return {
            "kind": "perception",
            "fn": question.target,
            "token": tok,
            "image": "data:image/png;base64," + base64.b64encode(elem.render_payload).decode(),
            "answer_schema": "choice",
        }


# ---------------------------------------------------------------------------
# concrete ops (each returns a list of (value, constraint) outcomes)


def _make_pred(cmp):
    def op(ctx, args):
        return [(FnVal("pred", cmp, args[0]), fb.EMPTY)]

    return op


def _make_curry(f):
    def op(ctx, args):
        return [(FnVal("curry", f, args[0]), fb.EMPTY)]

    return op


def _op_head(ctx, args):
    toks = args[0]
    return [(toks[0], fb.EMPTY)]


def _op_tail(ctx, args):
    toks = args[0]
    return [(toks[1:], fb.EMPTY)]


def _op_plus2(ctx, args):
    return [(args[0] + args[1], fb.EMPTY)]


def _op_mult2(ctx, args):
    return [(args[0] * args[1], fb.EMPTY)]


def _op_map(ctx, args):
    f, lst = args
    if f.tag == "neural":
        # raw token list -> one masked int list per surviving label combo
        outs = [((), fb.EMPTY)]
        for tok in lst:
            per = ctx.neural_outcomes(f.name, tok)
            nxt = []
            for slots, c in outs:
                for label, psi in per:
                    merged = fb.conjoin(c, psi)
                    if merged is not fb.UNSAT and fb.sat(merged, ctx.store):
                        nxt.append((slots + ((label, True),), merged))
            outs = nxt
        return [(slots, c) for slots, c in outs]
    # masked list: transform every slot's value, keep masks
    out = tuple((ctx.plugin.apply_fn_concrete(f, v), p) for v, p in lst)
    return [(out, fb.EMPTY)]


def _op_filter(ctx, args):
    pred, lst = args
    out = tuple((v, p and _cmp_apply(pred.name, v, pred.arg)) for v, p in lst)
    return [(out, fb.EMPTY)]


def _op_fold(ctx, args):
    f, init, lst = args
    acc = init
    for v, p in lst:
        if p:
            acc = _fold_step(f.name, acc, v)
    return [(acc, fb.EMPTY)]


# ---------------------------------------------------------------------------
# abstract domain: interval x three-valued presence


class VisArithAbs(AbstractContext):
    def __init__(self, ctx: EvalCtx):
        self.ctx = ctx

    # -- lattice ------------------------------------------------------------
    def alpha(self, values) -> object:
        values = list(values)
        first = values[0]
        if isinstance(first, bool) or isinstance(first, int):
            ints = [int(v) for v in values]
            return interval(min(ints), max(ints))
        if isinstance(first, PerceptRef):
            return first if all(v == first for v in values) else TOP
        if isinstance(first, tuple) and first and isinstance(first[0], tuple):
            # masked lists
            n = len(first)
            slots = []
            for i in range(n):
                present = [v[i][0] for v in values if v[i][1]]
                absent = any(not v[i][1] for v in values)
                if present and absent:
                    z = None
                elif present:
                    z = True
                else:
                    z = False
                lo, hi = (min(present), max(present)) if present else (0, -1)
                slots.append((lo, hi, z))
            return ("list", tuple(slots))
        if isinstance(first, tuple):
            return first if all(v == first for v in values) else TOP
        return TOP

    def alpha_input(self, dom_input: DigitListInput):
        return tuple(e.ref for e in dom_input.elements)

    def member(self, value, a) -> bool:
        if _is_int(a):
            if isinstance(value, bool):
                value = int(value)
            return isinstance(value, int) and a[1] <= value <= a[2]
        if _is_list(a):
            slots = a[1]
            if not (isinstance(value, tuple) and len(value) == len(slots)):
                return False
            for (v, p), (lo, hi, z) in zip(value, slots):
                if p:
                    if z is False or not (lo <= v <= hi):
                        return False
                else:
                    if z is True:
                        return False
            return True
        if isinstance(a, PerceptRef) or isinstance(a, tuple) and not _is_fn(a):
            return value == a
        return True  # fn markers impose nothing

    def meet(self, a, b):
        if _is_int(a) and _is_int(b):
            lo, hi = max(a[1], b[1]), min(a[2], b[2])
            if lo > hi:
                raise EmptyAbstraction("empty interval")
            return interval(lo, hi)
        if _is_list(a) and _is_list(b):
            if len(a[1]) != len(b[1]):
                raise EmptyAbstraction("list length mismatch")
            slots = []
            for (lo1, hi1, z1), (lo2, hi2, z2) in zip(a[1], b[1]):
                z = _presence_meet(z1, z2)
                lo, hi = max(lo1, lo2), min(hi1, hi2)
                if lo > hi:
                    if z is True:
                        raise EmptyAbstraction("present slot with empty interval")
                    z = False
                slots.append((lo, hi, z))
            return ("list", tuple(slots))
        if a == b:
            return a
        if _is_fn(a) or _is_fn(b):
            return a if _is_fn(b) else b
        raise EmptyAbstraction(f"incompatible meet {a!r} / {b!r}")

    # -- forward ------------------------------------------------------------
    def forward_const(self, value):
        if isinstance(value, bool):
            return point(int(value))
        if isinstance(value, int):
            return point(value)
        if isinstance(value, PerceptRef):
            return value
        return TOP

    def _digit_interval(self, tok: PerceptRef):
        labels = self.ctx.constrained_labels(DIGIT_FN, tok)
        if not labels:
            raise EmptyAbstraction(f"no consistent label for {tok.token}")
        return interval(min(labels), max(labels))

    def forward_neural(self, fn: str, arg_abs):
        assert isinstance(arg_abs, PerceptRef)
        return self._digit_interval(arg_abs)

    def forward_if(self, cond_abs, then_abs, else_abs):
        if _is_int(then_abs) and _is_int(else_abs):
            return interval(min(then_abs[1], else_abs[1]), max(then_abs[2], else_abs[2]))
        return TOP

    def forward_op(self, op: str, kids: list):
        if op.startswith("fnref:"):
            name = op.split(":", 1)[1]
            tag = "neural" if name == DIGIT_FN else "prim"
            return ("fn", tag, name, None)
        if op.startswith("pred:"):
            return ("fn", "pred", op.split(":", 1)[1], kids[0])
        if op.startswith("curry:"):
            return ("fn", "curry", op.split(":", 1)[1], kids[0])
        if op == "head":
            return kids[0][0]
        if op == "tail":
            return kids[0][1:]
        if op == "plus2":
            return interval(kids[0][1] + kids[1][1], kids[0][2] + kids[1][2])
        if op == "mult2":
            return interval(kids[0][1] * kids[1][1], kids[0][2] * kids[1][2])
        if op == "map":
            return self._fwd_map(kids[0], kids[1])
        if op == "filter":
            return self._fwd_filter(kids[0], kids[1])
        if op == "fold":
            return self._fwd_fold(kids[0], kids[1], kids[2])
        raise KeyError(op)

    def _fwd_map(self, f, lst):
        if f[1] == "neural":
            slots = []
            for tok in lst:
                iv = self._digit_interval(tok)
                slots.append((iv[1], iv[2], True))
            return ("list", tuple(slots))
        _, _, name, carg = f
        clo, chi = carg[1], carg[2]
        slots = []
        for lo, hi, z in lst[1]:
            if name == "plus":
                nlo, nhi = lo + clo, hi + chi
            elif name == "prod":
                nlo, nhi = lo * clo, hi * chi
            elif name == "max":
                nlo, nhi = max(lo, clo), max(hi, chi)
            else:
                raise KeyError(name)
            slots.append((nlo, nhi, z))
        return ("list", tuple(slots))

    def _fwd_filter(self, f, lst):
        _, _, cmp, carg = f
        clo, chi = carg[1], carg[2]
        slots = []
        for lo, hi, z in lst[1]:
            if z is False:
                slots.append((lo, hi, False))
                continue
            if _pred_definitely_true(cmp, lo, hi, clo, chi):
                slots.append((lo, hi, z))
            elif _pred_definitely_false(cmp, lo, hi, clo, chi):
                slots.append((lo, hi, False))
            else:
                slots.append((lo, hi, _and3(z, None)))
        return ("list", tuple(slots))

    def _fwd_fold(self, f, init, lst):
        name = f[2]
        lo, hi = init[1], init[2]
        for elo, ehi, z in lst[1]:
            if z is False:
                continue
            ilo = _fold_step(name, lo, max(elo, 0))
            ihi = _fold_step(name, hi, ehi)
            if z is True:
                lo, hi = ilo, ihi
            else:  # unknown: hull of include / skip
                lo, hi = min(ilo, lo), max(ihi, hi)
        return interval(lo, hi)

    # -- backward -----------------------------------------------------------
    def inverse_op(self, op: str, i: int, out, kids: list):
        if out is TOP:
            return None
        if op == "map" and i == 1:
            return self._inv_map(kids[0], out, kids[1])
        if op == "filter" and i == 1:
            return self._inv_filter(kids[0], out, kids[1])
        if op == "fold" and i == 2:
            return self._inv_fold_list(kids[0], kids[1], out, kids[2])
        if op == "fold" and i == 1:
            return self._inv_fold_init(kids[0], kids[1], out, kids[2])
        if op == "plus2":
            other = kids[1 - i]
            return interval(max(0, out[1] - other[2]), out[2] - other[1])
        if op == "mult2":
            other = kids[1 - i]
            if other[1] >= 1:
                return interval(math.ceil(out[1] / max(other[2], 1)), out[2] // other[1])
            return None
        return None

    def _inv_map(self, f, out, child):
        if f[1] == "neural":
            # the classifier is the identity on annotations, but the child
            # here is the raw token list: label filtering happens at this
            # map node's own annotation
            return None
        _, _, name, carg = f
        clo, chi = carg[1], carg[2]
        slots = []
        for (lo, hi, z), (plo, phi, _) in zip(out[1], child[1]):
            if name == "plus":
                nlo, nhi = max(0, lo - chi), hi - clo
            elif name == "prod":
                if clo >= 1:
                    nlo, nhi = math.ceil(lo / chi), hi // clo
                else:
                    nlo, nhi = plo, phi
            elif name == "max":
                nlo = lo if lo > chi else 0
                nhi = hi
            else:
                raise KeyError(name)
            slots.append((nlo, nhi, z))
        return ("list", tuple(slots))

    def _inv_filter(self, f, out, child):
        _, _, cmp, carg = f
        clo, chi = carg[1], carg[2]
        slots = []
        for (lo, hi, z), cslot in zip(out[1], child[1]):
            if z is True:
                nlo, nhi = _pred_tighten(cmp, lo, hi, clo, chi)
                slots.append((nlo, nhi, True))
            else:
                slots.append(cslot)  # no information about pre-filter slots
        return ("list", tuple(slots))

    def _inv_fold_list(self, f, init, out, child):
        name = f[2]
        a_out, b_out = out[1], out[2]
        ca, cb = init[1], init[2]
        slots = list(child[1])
        n = len(slots)
        if name == "inc":
            return self._inv_fold_inc(a_out, b_out, ca, cb, slots)
        if name == "plus":
            sum_b = sum(max(hi, 0) for lo, hi, z in slots if z is not False)
            sum_a_true = sum(max(lo, 0) for lo, hi, z in slots if z is True)
            new = []
            for lo, hi, z in slots:
                ob = sum_b - (max(hi, 0) if z is not False else 0)
                oa = sum_a_true - (max(lo, 0) if z is True else 0)
                nlo = max(0, a_out - cb - ob)
                nhi = b_out - ca - oa
                new.append((nlo, nhi, z))
            return ("list", tuple(new))
        if name == "max":
            return ("list", tuple((lo, b_out, z) for lo, hi, z in slots))
        if name == "product":
            if a_out < 1:
                return None
            prod_true = max(ca, 1)
            prod_nonfalse = max(cb, 1)
            for lo, hi, z in slots:
                if z is True:
                    prod_true *= max(lo, 1)
                if z is not False:
                    prod_nonfalse *= max(hi, 1)
            new = []
            for lo, hi, z in slots:
                den_lo = prod_true // max(lo, 1) if z is True else prod_true
                den_hi = prod_nonfalse // max(hi, 1) if z is not False else prod_nonfalse
                nhi = b_out // max(den_lo, 1)
                nlo = math.ceil(a_out / max(den_hi, 1))
                new.append((max(nlo, 0), nhi, z))
            return ("list", tuple(new))
        return None

    def _inv_fold_inc(self, a_out, b_out, ca, cb, slots):
        n_true = sum(1 for _, _, z in slots if z is True)
        n_star = sum(1 for _, _, z in slots if z is None)
        count_lo = a_out - cb
        count_hi = b_out - ca
        if n_true > count_hi or n_true + n_star < count_lo:
            raise EmptyAbstraction("infeasible presence count")
        force = None
        if n_star and n_true + n_star == count_lo:
            force = True
        elif n_star and n_true == count_hi:
            force = False
        if force is None:
            return None
        new = [(lo, hi, force if z is None else z) for lo, hi, z in slots]
        return ("list", tuple(new))

    def _inv_fold_init(self, f, init, out, child):
        name = f[2]
        a_out, b_out = out[1], out[2]
        slots = child[1]
        if name == "plus":
            sum_b = sum(max(hi, 0) for lo, hi, z in slots if z is not False)
            sum_a_true = sum(max(lo, 0) for lo, hi, z in slots if z is True)
            return interval(max(0, a_out - sum_b), b_out - sum_a_true)
        if name == "inc":
            n_true = sum(1 for _, _, z in slots if z is True)
            n_star = sum(1 for _, _, z in slots if z is None)
            return interval(max(0, a_out - n_true - n_star), b_out - n_true)
        if name == "max":
            return interval(0, b_out)
        return None


def _pred_definitely_true(cmp, lo, hi, clo, chi):
    if cmp == "<":
        return hi < clo
    if cmp == "<=":
        return hi <= clo
    if cmp == ">":
        return lo > chi
    if cmp == ">=":
        return lo >= chi
    if cmp == "=":
        return lo == hi == clo == chi
    raise KeyError(cmp)


def _pred_definitely_false(cmp, lo, hi, clo, chi):
    if cmp == "<":
        return lo >= chi
    if cmp == "<=":
        return lo > chi
    if cmp == ">":
        return hi <= clo
    if cmp == ">=":
        return hi < clo
    if cmp == "=":
        return hi < clo or lo > chi
    raise KeyError(cmp)


def _pred_tighten(cmp, lo, hi, clo, chi):
    """Interval of values that can satisfy `x cmp c` for some c in [clo,chi]."""
    if cmp == "<":
        return lo, min(hi, chi - 1)
    if cmp == "<=":
        return lo, min(hi, chi)
    if cmp == ">":
        return max(lo, clo + 1), hi
    if cmp == ">=":
        return max(lo, clo), hi
    if cmp == "=":
        return max(lo, clo), min(hi, chi)
    raise KeyError(cmp)


# ---------------------------------------------------------------------------
# grammar enumeration


@dataclass(frozen=True)
class GrammarConfig:
    constants: tuple = tuple(range(10))
    comparators: tuple = ("<=", ">=")
    mappers: tuple = ("plus", "prod", "max")
    folds: tuple = ("plus", "max", "product", "inc")
    inits: tuple = (0, 1, "head")
    max_wrappers: int = 2
    allow_head_pred: bool = True
    allow_head_mapper: bool = False
    allow_double_map: bool = False
    allow_tail: bool = False
    constant_programs: bool = False


def _head_digit():
    return NeuralApp(DIGIT_FN, SymApp("head", (Var("l"),)))


def _base_list(cfg: GrammarConfig):
    yield SymApp("map", (fnref(DIGIT_FN), Var("l"))), 3
    if cfg.allow_tail:
        yield SymApp("map", (fnref(DIGIT_FN), SymApp("tail", (Var("l"),)))), 4


def _preds(cfg: GrammarConfig):
    for cmp in cfg.comparators:
        for c in cfg.constants:
            yield SymApp(f"pred:{cmp}", (Const(c),)), 2, "F"
        if cfg.allow_head_pred:
            yield SymApp(f"pred:{cmp}", (_head_digit(),)), 4, "F"


def _mappers(cfg: GrammarConfig):
    for f in cfg.mappers:
        for c in cfg.constants:
            yield SymApp(f"curry:{f}", (Const(c),)), 2, "M"
        if cfg.allow_head_mapper:
            yield SymApp(f"curry:{f}", (_head_digit(),)), 4, "M"


def _list_exprs(cfg: GrammarConfig, budget: int):
    """All list-typed expressions: the digit list plus up to max_wrappers
    filter/map layers."""
    wrappers = list(_preds(cfg)) + list(_mappers(cfg))
    for base, bsize in _base_list(cfg):
        if bsize <= budget:
            yield base, bsize
        if cfg.max_wrappers >= 1:
            for w, wsize, kind in wrappers:
                size1 = bsize + 1 + wsize
                if size1 > budget:
                    continue
                op = "filter" if kind == "F" else "map"
                e1 = SymApp(op, (w, base))
                yield e1, size1
                if cfg.max_wrappers >= 2:
                    for w2, w2size, kind2 in wrappers:
                        if kind == "M" and kind2 == "M" and not cfg.allow_double_map:
                            continue
                        size2 = size1 + 1 + w2size
                        if size2 > budget:
                            continue
                        op2 = "filter" if kind2 == "F" else "map"
                        yield SymApp(op2, (w2, e1)), size2


def enumerate_grammar(cfg: GrammarConfig, max_size: int):
    """All well-typed programs within the AST size bound, syntactically
    deduplicated."""
    seen = set()
    out = []

    def emit(body):
        p = Program(body, param="l")
        if p.size <= max_size and p.key() not in seen:
            seen.add(p.key())
            out.append(p)

    if cfg.constant_programs:
        for c in cfg.constants:
            emit(Const(c))
    for f in cfg.folds:
        for init in cfg.inits:
            if init == "head":
                init_node, isize = _head_digit(), 3
            else:
                init_node, isize = Const(init), 1
            budget = max_size - 2 - isize
            for lst, _ in _list_exprs(cfg, budget):
                emit(SymApp("fold", (fnref(f), init_node, lst)))
    return out


# ---------------------------------------------------------------------------
# inputs and catalog


def generate_inputs(seed: int, count: int, min_len: int = 2, max_len: int = 4,
                    digit_lo: int = 0, digit_hi: int = 9, prefix: str = "") -> list[DigitListInput]:
    rng = random.Random(seed)
    out = []
    for i in range(count):
        n = rng.randint(min_len, max_len)
        elems = tuple(
            PerceptionInput(token=f"{prefix}i{i}x{j}", hidden_truth=rng.randint(digit_lo, digit_hi))
            for j in range(n)
        )
        out.append(DigitListInput(id=f"{prefix}i{i}", elements=elems))
    return out


def register_inputs(inputs, suite):
    for inp in inputs:
        for e in inp.elements:
            suite.register(e)


def load_catalog() -> list[dict]:
    import json
    from importlib import resources

    with resources.files("consynth.data").joinpath("visarith_catalog.json").open() as f:
        return json.load(f)
