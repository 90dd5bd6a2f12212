"""Object-extraction domain over synthetic scenes.

Programs have the shape `let y = segment(x) in E` where E combines the
detected-object set with per-attribute neural sets, set algebra, spatial
relation filters over pairs, and projections.  Segmentation and attribute
uncertainty are modeled per object (binary existence / binary attribute), so
every composite neural outcome carries a conjunction of atomic bindings and
questions stay binary.

The abstract domain is the set interval [O-, O+] with per-element membership
`O- <= O <= O+`.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Optional

from . import feedback as fb
from .absint import TOP, AbstractContext, EmptyAbstraction
from .conformal import PerceptionInput
from .domain import DomainPlugin, EvalCtx, NeuralFn
from .dsl import Const, Let, NeuralApp, Program, Seq, SymApp, Var
from .values import FnVal, PerceptRef, Value

RELATIONS = ("above", "below", "left", "right", "contains", "next_to")


@dataclass(frozen=True)
class SceneObject:
    oid: str
    box: tuple  # (left, right, top, bottom) pixels, left<right, top<bottom


@dataclass(frozen=True)
class Scene:
    id: str
    objects: tuple            # of SceneObject
    vocab: tuple              # attribute names
    exists_tokens: dict       # oid -> PerceptionInput (binary)
    attr_tokens: dict         # (oid, attr) -> PerceptionInput (binary)
    img_token: str = ""

    def ref(self) -> PerceptRef:
        return PerceptRef(self.img_token or f"{self.id}:img")

    def all_tokens(self):
        yield from self.exists_tokens.values()
        yield from self.attr_tokens.values()


def spatial_relation(rel: str, b1: tuple, b2: tuple, margin: int = 0) -> bool:
    l1, r1, t1, b1_ = b1
    l2, r2, t2, b2_ = b2
    if rel == "above":
        return b1_ <= t2 + margin
    if rel == "below":
        return t1 >= b2_ - margin
    if rel == "left":
        return r1 <= l2 + margin
    if rel == "right":
        return l1 >= r2 - margin
    if rel == "contains":
        return l1 <= l2 + margin and r1 >= r2 - margin and t1 <= t2 + margin and b1_ >= b2_ - margin
    if rel == "next_to":
        h_gap = max(l2 - r1, l1 - r2, 0)
        v_overlap = min(b1_, b2_) - max(t1, t2)
        return h_gap <= 15 + margin and v_overlap > 0
    raise KeyError(rel)


class ObjExtractPlugin(DomainPlugin):
    name = "objextract"

    def __init__(self, vocab: tuple, margin: int = 0):
        super().__init__()
        self.vocab = tuple(vocab)
        self.margin = margin
        self.scene_index: dict[str, Scene] = {}
        self.neural = {"segment": NeuralFn("segment", (False, True), composite=True)}
        for a in self.vocab:
            self.neural[f"attrset:{a}"] = NeuralFn(f"attrset:{a}", (False, True), composite=True)
        self.ops = {
            "union": _op_union,
            "intersect": _op_intersect,
            "complement": _op_complement,
            "product": _op_product,
            "proj1": _op_proj(0),
            "proj2": _op_proj(1),
            "nonempty": _op_nonempty,
        }
        for r in RELATIONS:
            self.ops[f"relfilter:{r}"] = _make_relfilter(r, margin)

    def fn_value(self, name):
        raise KeyError(name)

    # -- composite neural outcomes -------------------------------------------
    def _per_object_options(self, scene: Scene, ctx: EvalCtx, channel: str, token_of):
        """For each object: (oid, allowed labels, token).  Empty `allowed`
        means no consistent valuation exists."""
        out = []
        for obj in scene.objects:
            tok = token_of(obj.oid)
            allowed = ctx.constrained_labels(channel, tok.ref)
            out.append((obj.oid, allowed, tok))
        return out

    def _composite_outcomes(self, options, channel: str):
        fixed, uncertain = [], []
        for oid, allowed, tok in options:
            if not allowed:
                return []
            if len(allowed) == 1:
                if allowed[0]:
                    fixed.append(oid)
            else:
                uncertain.append((oid, tok))
        outcomes = []
        for combo in itertools.product((False, True), repeat=len(uncertain)):
            members = frozenset(fixed) | {oid for (oid, _), inc in zip(uncertain, combo) if inc}
            bindings = fb.constraint(
                *[(channel, tok.token, inc) for (oid, tok), inc in zip(uncertain, combo)]
            )
            outcomes.append((members, bindings))
        return outcomes

    def neural_outcomes(self, fn: str, tok: PerceptRef, ctx: EvalCtx):
        scene: Scene = ctx.input
        if fn == "segment":
            options = self._per_object_options(scene, ctx, "exists", lambda o: scene.exists_tokens[o])
            return self._composite_outcomes(options, "exists")
        if fn.startswith("attrset:"):
            attr = fn.split(":", 1)[1]
            options = self._per_object_options(scene, ctx, "attr", lambda o: scene.attr_tokens[(o, attr)])
            return self._composite_outcomes(options, "attr")
        raise KeyError(fn)

    def neural_single(self, fn: str, tok: PerceptRef, atomic_label_of) -> Value:
        scene = self._scene_of(tok)
        if fn == "segment":
            return frozenset(
                o.oid for o in scene.objects if atomic_label_of("exists", scene.exists_tokens[o.oid].ref)
            )
        if fn.startswith("attrset:"):
            attr = fn.split(":", 1)[1]
            return frozenset(
                o.oid for o in scene.objects if atomic_label_of("attr", scene.attr_tokens[(o.oid, attr)].ref)
            )
        raise KeyError(fn)

    def _scene_of(self, tok: PerceptRef) -> Scene:
        return self.scene_index[tok.token]

    def register_scene(self, scene: Scene):
        self.scene_index[scene.ref().token] = scene

    def input_value(self, scene: Scene) -> Value:
        self.scene_index.setdefault(scene.ref().token, scene)
        return scene.ref()

    def input_tokens(self, scene: Scene) -> frozenset:
        return frozenset(t.token for t in scene.all_tokens())

    def atomic_questions(self, scene: Scene):
        out = []
        for obj in scene.objects:
            out.append(("exists", scene.exists_tokens[obj.oid].token))
            for a in self.vocab:
                out.append(("attr", scene.attr_tokens[(obj.oid, a)].token))
        return out

    def input_id(self, scene: Scene) -> str:
        return scene.id

    def abstract_context(self, scene: Scene, ctx: EvalCtx) -> "ObjExtractAbs":
        return ObjExtractAbs(ctx, self)

    def enumerate_programs(self, grammar_config, max_size: int):
        return enumerate_objx(self, grammar_config, max_size)

    def render_question(self, question, dom_input) -> dict:
        scene: Scene = dom_input
        boxes = [{"oid": o.oid, "box": list(o.box)} for o in scene.objects]
        if question.target == "synthfunc":
            return {
                "kind": "io",
                "input_id": scene.id,
                "scene": {"boxes": boxes},
                "answer_schema": "object_set",
            }
        tok = question.key
        oid = tok.split(":")[1]
        payload = {
            "kind": "perception",
            "fn": question.target,
            "token": tok,
            "scene": {"boxes": boxes, "highlight": oid},
            "answer_schema": "choice",
        }
        if question.target == "attr":
            payload["attribute"] = tok.split(":")[-1]
        return payload


# ---------------------------------------------------------------------------
# concrete ops


def _op_union(ctx, args):
    return [(frozenset().union(*args), fb.EMPTY)]


def _op_intersect(ctx, args):
    out = args[0]
    for a in args[1:]:
        out = out & a
    return [(out, fb.EMPTY)]


def _op_complement(ctx, args):
    e, universe = args
    return [(universe - e, fb.EMPTY)]


def _op_product(ctx, args):
    a, b = args
    return [(frozenset(itertools.product(sorted(a), sorted(b))), fb.EMPTY)]


def _op_proj(i):
    def op(ctx, args):
        return [(frozenset(pair[i] for pair in args[0]), fb.EMPTY)]

    return op


def _op_nonempty(ctx, args):
    return [(len(args[0]) > 0, fb.EMPTY)]


def _make_relfilter(rel, margin):
    def op(ctx, args):
        scene: Scene = ctx.input
        boxes = {o.oid: o.box for o in scene.objects}
        kept = frozenset(
            (a, b) for a, b in args[0] if spatial_relation(rel, boxes[a], boxes[b], margin)
        )
        return [(kept, fb.EMPTY)]

    return op


# ---------------------------------------------------------------------------
# set-interval abstract domain


def setint(lower: frozenset, upper: frozenset):
    return ("set", lower, upper)


def _is_set(a):
    return isinstance(a, tuple) and len(a) == 3 and a[0] == "set"


def _is_int(a):
    return isinstance(a, tuple) and len(a) == 3 and a[0] == "int"


class ObjExtractAbs(AbstractContext):
    def __init__(self, ctx: EvalCtx, plugin: ObjExtractPlugin):
        self.ctx = ctx
        self.plugin = plugin
        self.scene: Scene = ctx.input
        self._universe = None

    def universe(self):
        if self._universe is None:
            self._universe = self._channel_interval("exists", lambda o: self.scene.exists_tokens[o])
        return self._universe

    def candidates(self) -> frozenset:
        """All candidate objects regardless of existence: the sound upper
        bound for arbitrary object-set values (attribute sets may contain
        objects the segmentation excludes)."""
        return frozenset(o.oid for o in self.scene.objects)

    def _channel_interval(self, channel, token_of):
        must, may = set(), set()
        for obj in self.scene.objects:
            allowed = self.ctx.constrained_labels(channel, token_of(obj.oid).ref)
            if not allowed:
                raise EmptyAbstraction(f"no consistent {channel} label for {obj.oid}")
            if True in allowed:
                may.add(obj.oid)
                if False not in allowed:
                    must.add(obj.oid)
        return setint(frozenset(must), frozenset(may))

    # -- lattice ------------------------------------------------------------
    def alpha(self, values):
        values = list(values)
        first = values[0]
        if isinstance(first, frozenset):
            lower = frozenset.intersection(*values)
            upper = frozenset.union(*values)
            return setint(lower, upper)
        if isinstance(first, (bool, int)):
            ints = [int(v) for v in values]
            return ("int", min(ints), max(ints))
        if isinstance(first, PerceptRef):
            return first if all(v == first for v in values) else TOP
        return TOP

    def alpha_input(self, scene: Scene):
        return scene.ref()

    def member(self, value, a) -> bool:
        if _is_set(a):
            return isinstance(value, frozenset) and a[1] <= value <= a[2]
        if _is_int(a):
            return isinstance(value, (bool, int)) and a[1] <= int(value) <= a[2]
        if isinstance(a, PerceptRef):
            return value == a
        return True

    def meet(self, a, b):
        if _is_set(a) and _is_set(b):
            lower, upper = a[1] | b[1], a[2] & b[2]
            if not lower <= upper:
                raise EmptyAbstraction("set interval bottom")
            return setint(lower, upper)
        if _is_int(a) and _is_int(b):
            lo, hi = max(a[1], b[1]), min(a[2], b[2])
            if lo > hi:
                raise EmptyAbstraction("empty interval")
            return ("int", lo, hi)
        if a == b:
            return a
        raise EmptyAbstraction(f"incompatible meet {a!r} / {b!r}")

    # -- forward ------------------------------------------------------------
    def forward_const(self, value):
        if isinstance(value, frozenset):
            return setint(value, value)
        if isinstance(value, (bool, int)):
            return ("int", int(value), int(value))
        if isinstance(value, PerceptRef):
            return value
        return TOP

    def forward_neural(self, fn: str, arg_abs):
        if fn == "segment":
            return self.universe()
        if fn.startswith("attrset:"):
            attr = fn.split(":", 1)[1]
            return self._channel_interval("attr", lambda o: self.scene.attr_tokens[(o, attr)])
        raise KeyError(fn)

    def forward_op(self, op: str, kids: list):
        if op == "union":
            return setint(
                frozenset().union(*[k[1] for k in kids]),
                frozenset().union(*[k[2] for k in kids]),
            )
        if op == "intersect":
            return setint(
                frozenset.intersection(*[k[1] for k in kids]),
                frozenset.intersection(*[k[2] for k in kids]),
            )
        if op == "complement":
            e, u = kids
            return setint(u[1] - e[2], u[2] - e[1])
        if op == "product":
            a, b = kids
            return setint(
                frozenset(itertools.product(sorted(a[1]), sorted(b[1]))),
                frozenset(itertools.product(sorted(a[2]), sorted(b[2]))),
            )
        if op.startswith("relfilter:"):
            rel = op.split(":", 1)[1]
            boxes = {o.oid: o.box for o in self.scene.objects}
            keep = lambda pairs: frozenset(
                (x, y) for x, y in pairs if spatial_relation(rel, boxes[x], boxes[y], self.plugin.margin)
            )
            return setint(keep(kids[0][1]), keep(kids[0][2]))
        if op in ("proj1", "proj2"):
            i = 0 if op == "proj1" else 1
            return setint(
                frozenset(p[i] for p in kids[0][1]),
                frozenset(p[i] for p in kids[0][2]),
            )
        if op == "nonempty":
            lo = 1 if kids[0][1] else 0
            hi = 1 if kids[0][2] else 0
            return ("int", lo, hi)
        raise KeyError(op)

    # -- backward -----------------------------------------------------------
    def inverse_op(self, op: str, i: int, out, kids: list):
        if out is TOP:
            return None
        if op == "union":
            others_upper = frozenset().union(*[k[2] for j, k in enumerate(kids) if j != i])
            return setint(out[1] - others_upper, out[2])
        if op == "intersect":
            u_plus = self._pair_or_obj_universe(kids[i])
            others_lower = frozenset.intersection(*[k[1] for j, k in enumerate(kids) if j != i])
            return setint(out[1], out[2] | (u_plus - others_lower))
        if op == "complement":
            if i == 0:
                u = kids[1]
                return setint(u[1] - out[2], u[2] - out[1])
            return None
        if op == "product":
            sibling = kids[1 - i]
            lower = frozenset(p[i] for p in out[1])
            if sibling[1]:
                return setint(lower, frozenset(p[i] for p in out[2]))
            return setint(lower, kids[i][2])
        if op.startswith("relfilter:"):
            u = self.candidates()
            return setint(out[1], frozenset(itertools.product(sorted(u), sorted(u))))
        if op in ("proj1", "proj2"):
            j = 0 if op == "proj1" else 1
            child_upper = kids[0][2]
            allowed = frozenset(p for p in child_upper if p[j] in out[2])
            return setint(kids[0][1], allowed)
        if op == "nonempty":
            if out[2] == 0:  # output must be False: child is empty
                return setint(frozenset(), frozenset())
            return None
        return None

    def _pair_or_obj_universe(self, sample_abs):
        upper = self.candidates()
        some = next(iter(sample_abs[2]), None)
        if isinstance(some, tuple):
            return frozenset(itertools.product(sorted(upper), sorted(upper)))
        return upper


# ---------------------------------------------------------------------------
# synthetic scenes


def synth_scene_generator(seed: int, vocab: tuple, count: int,
                          min_objects: int = 2, max_objects: int = 5,
                          attr_rate: float = 0.35, exists_rate: float = 0.85,
                          prefix: str = "") -> list[Scene]:
    """Reproducible scenes: jittered-grid boxes, Bernoulli attribute truths,
    per-object existence truths (spurious detections are `exists = False`)."""
    rng = random.Random(seed)
    scenes = []
    for s in range(count):
        sid = f"{prefix}s{s}"
        n = rng.randint(min_objects, max_objects)
        cells = rng.sample([(gx, gy) for gx in range(3) for gy in range(3)], n)
        objects, ex_toks, at_toks = [], {}, {}
        for j, (gx, gy) in enumerate(cells):
            w, h = rng.randint(10, 24), rng.randint(10, 24)
            x0 = gx * 34 + rng.randint(0, 8)
            y0 = gy * 34 + rng.randint(0, 8)
            oid = f"{sid}o{j}"
            obj = SceneObject(oid, (x0, x0 + w, y0, y0 + h))
            objects.append(obj)
            ex_toks[oid] = PerceptionInput(
                token=f"{sid}:{oid}:exists",
                hidden_truth=rng.random() < exists_rate,
                kind="exists",
                render_hint={"scene": sid, "oid": oid, "box": list(obj.box)},
            )
            for a in vocab:
                at_toks[(oid, a)] = PerceptionInput(
                    token=f"{sid}:{oid}:a:{a}",
                    hidden_truth=rng.random() < attr_rate,
                    kind="attr",
                    render_hint={"scene": sid, "oid": oid, "attr": a, "box": list(obj.box)},
                )
        scenes.append(Scene(sid, tuple(objects), tuple(vocab), ex_toks, at_toks, img_token=f"{sid}:img"))
    return scenes


def register_scenes(scenes, suite, plugin: Optional[ObjExtractPlugin] = None):
    for sc in scenes:
        for t in sc.all_tokens():
            suite.register(t)
        if plugin is not None:
            plugin.register_scene(sc)


# ---------------------------------------------------------------------------
# programs and enumeration


def objx_program(expr) -> Program:
    body = Seq(Let("y", NeuralApp("segment", Var("x"))), expr)
    return Program(body, param="x")


def attr_filter(expr, attr: str):
    return SymApp("intersect", (expr, NeuralApp(f"attrset:{attr}", Var("x"))))


def find(e1, e2, rel: str, component: int = 1):
    projected = SymApp("proj1" if component == 0 else "proj2",
                       (SymApp(f"relfilter:{rel}", (SymApp("product", (e1, e2)),)),))
    return projected


@dataclass(frozen=True)
class ObjxGrammarConfig:
    attrs: tuple
    relations: tuple = ("above", "below", "contains")
    max_depth: int = 2
    allow_complement: bool = True
    allow_find: bool = True
    allow_setops: bool = True


def enumerate_objx(plugin: ObjExtractPlugin, cfg: ObjxGrammarConfig, max_size: int):
    """Extractor expressions over y up to the AST size bound; wrapped into
    full programs, syntactically deduplicated."""
    base = [(Var("y"), 1)]
    level = list(base)
    all_exprs = list(base)
    for _ in range(cfg.max_depth):
        nxt = []
        for e, sz in level:
            for a in cfg.attrs:
                nxt.append((attr_filter(e, a), sz + 3))
            if cfg.allow_complement:
                nxt.append((SymApp("complement", (e, Var("y"))), sz + 2))
        if cfg.allow_find:
            for (e1, s1), (e2, s2) in itertools.product(level, repeat=2):
                for r in cfg.relations:
                    for comp in (0, 1):
                        nxt.append((find(e1, e2, r, comp), s1 + s2 + 3))
        if cfg.allow_setops:
            for (e1, s1), (e2, s2) in itertools.combinations(level, 2):
                nxt.append((SymApp("union", (e1, e2)), s1 + s2 + 1))
                nxt.append((SymApp("intersect", (e1, e2)), s1 + s2 + 1))
        level = [(e, sz) for e, sz in nxt if sz + 4 <= max_size]
        all_exprs.extend(level)
    seen, out = set(), []
    for e, _ in all_exprs:
        p = objx_program(e)
        if p.size <= max_size and p.key() not in seen:
            seen.add(p.key())
            out.append(p)
    return out


def scene_to_json(scene: Scene) -> dict:
    return {
        "id": scene.id,
        "vocab": list(scene.vocab),
        "img_token": scene.img_token,
        "objects": [
            {
                "oid": o.oid,
                "box": list(o.box),
                "exists": {"token": scene.exists_tokens[o.oid].token,
                           "truth": scene.exists_tokens[o.oid].hidden_truth},
                "attrs": {
                    a: {"token": scene.attr_tokens[(o.oid, a)].token,
                        "truth": scene.attr_tokens[(o.oid, a)].hidden_truth}
                    for a in scene.vocab
                },
            }
            for o in scene.objects
        ],
    }


def scene_from_json(data: dict) -> Scene:
    objects, ex_toks, at_toks = [], {}, {}
    vocab = tuple(data["vocab"])
    for od in data["objects"]:
        obj = SceneObject(od["oid"], tuple(od["box"]))
        objects.append(obj)
        ex_toks[obj.oid] = PerceptionInput(
            token=od["exists"]["token"], hidden_truth=od["exists"]["truth"],
            kind="exists", render_hint={"scene": data["id"], "oid": obj.oid, "box": od["box"]})
        for a, ad in od["attrs"].items():
            at_toks[(obj.oid, a)] = PerceptionInput(
                token=ad["token"], hidden_truth=ad["truth"], kind="attr",
                render_hint={"scene": data["id"], "oid": obj.oid, "attr": a, "box": od["box"]})
    return Scene(data["id"], tuple(objects), vocab, ex_toks, at_toks,
                 img_token=data.get("img_token", ""))


def load_catalog() -> list[dict]:
    import json
    from importlib import resources

    with resources.files("consynth.data").joinpath("objextract_catalog.json").open() as f:
        return json.load(f)
