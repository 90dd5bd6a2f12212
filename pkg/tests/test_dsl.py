import pytest

from consynth import feedback as fb
from consynth.dsl import (
    Const, Let, NeuralApp, Program, ScopeError, Seq, SymApp, Var,
    ast_size, eval_ground_truth, eval_standard, from_sexpr, to_sexpr, fnref,
)
from consynth.fixtures import PROGRAMS, overview_fixture
from consynth.values import PerceptRef


def test_constant_program_sizes():
    assert ast_size(Program(Const(7), param="l")) == 1
    p = Program(SymApp("plus2", (NeuralApp("toDigit", Const(PerceptRef("x"))), Const(1))),
                param="l")
    assert ast_size(p) == 4


def test_overview_program_size():
    p = from_sexpr(PROGRAMS[0])  # fold inc 0 (filter (> 5) (map toDigit l))
    assert ast_size(p) == 9


def test_node_ids_unique_and_stable():
    p = from_sexpr(PROGRAMS[0])
    ids = [p.node_id(n) for n in p.nodes]
    assert sorted(ids) == list(range(len(p.nodes)))
    again = [p.node_id(n) for n in p.nodes]
    assert ids == again


def test_scope_errors():
    with pytest.raises(ScopeError):
        Program(Var("zz"), param="l")
    with pytest.raises(ScopeError):
        Program(Seq(Let("l", Const(1)), Var("l")), param="l")  # shadows the parameter


def test_sexpr_round_trip():
    for s in PROGRAMS:
        p = from_sexpr(s)
        assert from_sexpr(to_sexpr(p)).key() == p.key()


def test_sexpr_round_trip_let():
    p = Program(Seq(Let("y", NeuralApp("segment", Var("x"))), Var("y")), param="x")
    assert from_sexpr(to_sexpr(p)).key() == p.key()


def test_eval_standard_overview():
    # the model misreads x2 as 8, so the count-over-5 program returns 3
    fx = overview_fixture()
    p1 = fx.programs[0]
    assert eval_standard(p1, fx.dom_input, fx.plugin, fx.suite) == 3
    const = Program(Const(7), param="l")
    assert eval_standard(const, fx.dom_input, fx.plugin, fx.suite) == 7


def test_eval_standard_sum_of_top1(overview):
    # 3-element list with top-1 predictions [2,4,9] -> sum 15
    from consynth.conformal import ConformalPredictor, FixedSetModel, PerceptionInput, PredictorSuite
    from consynth.visarith import DIGIT_FN, DigitListInput, VisArithPlugin

    toks = [PerceptionInput(token=f"s{i}", hidden_truth=t) for i, t in enumerate([2, 4, 9])]
    model = FixedSetModel(tuple(range(10)), {"s0": (2, 7), "s1": (4,), "s2": (9, 8)})
    suite = PredictorSuite({DIGIT_FN: ConformalPredictor(model, 0.5, 0.1, 0)}, {})
    for t in toks:
        suite.register(t)
    inp = DigitListInput(id="S", elements=tuple(toks))
    p = from_sexpr("(fold plus 0 (map @toDigit l))")
    assert eval_standard(p, inp, VisArithPlugin(), suite) == 15


def test_eval_ground_truth():
    fx = overview_fixture()
    p_sum = from_sexpr("(fold plus 0 (map @toDigit l))")
    # truths are [3, 0, 9, 7]
    assert eval_ground_truth(p_sum, fx.dom_input, fx.plugin, fx.oracle) == 19
    p_max = from_sexpr("(fold max 0 (map @toDigit l))")
    assert eval_ground_truth(p_max, fx.dom_input, fx.plugin, fx.oracle) == 9
    const = Program(Const(4), param="l")
    assert eval_ground_truth(const, fx.dom_input, fx.plugin, fx.oracle) == 4


def test_example_3_6_ground_truth():
    from consynth.conformal import ConformalPredictor, FixedSetModel, PerceptionInput, PredictorSuite
    from consynth.visarith import DIGIT_FN, DigitListInput, VisArithPlugin

    toks = [PerceptionInput(token=f"e{i}", hidden_truth=t) for i, t in enumerate([2, 4, 9])]
    model = FixedSetModel(tuple(range(10)), {"e0": (2, 7), "e1": (4,), "e2": (8, 9)})
    suite = PredictorSuite({DIGIT_FN: ConformalPredictor(model, 0.5, 0.1, 0)}, {})
    for t in toks:
        suite.register(t)
    inp = DigitListInput(id="E", elements=tuple(toks))

    class Oracle:
        def label(self, fn, tok):
            return {"e0": 2, "e1": 4, "e2": 9}[tok.token]

    p = from_sexpr("(fold plus 0 (map @toDigit l))")
    assert eval_ground_truth(p, inp, VisArithPlugin(), Oracle()) == 15


def test_eval_standard_referentially_transparent(overview):
    fx = overview_fixture()
    p = fx.programs[3]
    a = eval_standard(p, fx.dom_input, fx.plugin, fx.suite)
    b = eval_standard(p, fx.dom_input, fx.plugin, fx.suite)
    assert a == b


def test_no_neural_program_all_semantics_agree():
    from consynth.evaluator import eval_constrained_ref

    fx = overview_fixture()
    p = Program(SymApp("plus2", (Const(2), Const(3))), param="l")
    std = eval_standard(p, fx.dom_input, fx.plugin, fx.suite)
    gt = eval_ground_truth(p, fx.dom_input, fx.plugin, fx.oracle)
    conf = eval_constrained_ref(p, fb.FeedbackStore(), fx.dom_input, fx.plugin, fx.suite)
    assert std == gt == 5
    assert conf == frozenset([5])
