import random

import pytest

from consynth import feedback as fb
from consynth.conformal import ConformalPredictor, FixedSetModel, PerceptionInput, PredictorSuite
from consynth.dsl import Const, Let, NeuralApp, Program, Seq, SymApp, Var, children
from consynth.fixtures import overview_fixture
from consynth.visarith import DIGIT_FN, DigitListInput, GrammarConfig, VisArithPlugin, enumerate_grammar


@pytest.fixture
def overview():
    return overview_fixture()


# ---------------------------------------------------------------------------
# random small VisArith instances (programs <= 9 nodes, lists <= 4,
# prediction sets <= 3 labels)


class RandomVisArithEnv:
    def __init__(self, seed: int, max_len: int = 4, max_set: int = 3,
                 allow_infeasible_pins: bool = True):
        rng = random.Random(seed)
        self.rng = rng
        n = rng.randint(2, max_len)
        self.tokens = []
        sets = {}
        truths = {}
        for j in range(n):
            tok = f"r{seed}t{j}"
            labels = rng.sample(range(10), rng.randint(1, max_set))
            truth = rng.choice(labels)
            sets[tok] = tuple(labels)
            truths[tok] = truth
            self.tokens.append(PerceptionInput(token=tok, hidden_truth=truth))
        self.truths = truths
        model = FixedSetModel(tuple(range(10)), sets)
        self.suite = PredictorSuite({DIGIT_FN: ConformalPredictor(model, 0.5, 0.1, 0)}, {})
        for t in self.tokens:
            self.suite.register(t)
        self.dom_input = DigitListInput(id=f"rI{seed}", elements=tuple(self.tokens))
        self.plugin = VisArithPlugin()
        self.sets = sets
        store = fb.FeedbackStore()
        for t in self.tokens:
            if rng.random() < 0.35:
                if allow_infeasible_pins and rng.random() < 0.15:
                    label = rng.randrange(10)
                else:
                    label = rng.choice(sets[t.token])
                store = store.with_binding(DIGIT_FN, t.token, label)
        self.store = store

    def random_program(self, pool) -> Program:
        return self.rng.choice(pool)


_SMALL_POOL = None


def small_program_pool():
    """Programs of at most 9 nodes over a compact grammar."""
    global _SMALL_POOL
    if _SMALL_POOL is None:
        cfg = GrammarConfig(constants=(0, 1, 2, 4, 5, 7, 8),
                            comparators=("<", "<=", ">", ">=", "="),
                            mappers=("plus", "prod", "max"),
                            folds=("plus", "max", "product", "inc"),
                            inits=(0, 1),
                            max_wrappers=1,
                            allow_head_pred=False)
        _SMALL_POOL = enumerate_grammar(cfg, 9)
    return _SMALL_POOL


@pytest.fixture
def small_pool():
    return small_program_pool()


def all_valuations(env: RandomVisArithEnv):
    """Every feedback-consistent full labeling of the input's tokens."""
    import itertools

    options = []
    for t in env.tokens:
        pinned = env.store.label(DIGIT_FN, t.token)
        labels = [l for l in env.sets[t.token] if pinned is None or l == pinned]
        options.append([(t.token, l) for l in labels])
    for combo in itertools.product(*options):
        yield dict(combo)


def node_values(p: Program, valuation: dict, env: RandomVisArithEnv):
    """Concrete per-node values induced by one full labeling; None for
    function-reference nodes and the like."""
    from consynth.domain import EvalCtx
    from consynth.values import PerceptRef

    def resolver(fn, tok):
        return [(valuation[tok.token], fb.EMPTY)]

    ctx = EvalCtx(env.plugin, env.dom_input, fb.FeedbackStore(), resolver=resolver,
                  predictor=env.suite)
    values = {}

    def go(node, bindings):
        if isinstance(node, Const):
            v = node.value
        elif isinstance(node, Var):
            v = bindings[node.name]
        elif isinstance(node, NeuralApp):
            tok = go(node.arg, bindings)
            v = valuation[tok.token]
        elif isinstance(node, SymApp) and node.op.startswith("fnref:"):
            v = env.plugin.fn_value(node.op.split(":", 1)[1])
        elif isinstance(node, SymApp):
            args = [go(a, bindings) for a in node.args]
            outs = ctx.plugin.apply_op(node.op, args, ctx)
            assert len(outs) == 1  # fixed valuation: everything single-valued
            v = outs[0][0]
        else:
            raise TypeError(node)
        values[p.node_id(node)] = v
        return v

    bindings = {p.param: env.plugin.input_value(env.dom_input)}
    stmt = p.body
    while isinstance(stmt, Seq):
        if isinstance(stmt.first, Let):
            bindings[stmt.first.name] = go(stmt.first.expr, bindings)
        stmt = stmt.rest
    node = stmt.expr if isinstance(stmt, Let) else stmt
    go(node, bindings)
    return values
