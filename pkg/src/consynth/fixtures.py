"""Pinned demo scenario: four count-style candidate programs over one
four-digit input whose prediction sets are [{3}, {0,8}, {6,9}, {7}].

Used by tests, the demo benchmark of the session service, and the docs.
"""
from __future__ import annotations

from dataclasses import dataclass

from .conformal import ConformalPredictor, FixedSetModel, PerceptionInput, PredictorSuite
from .dsl import Program, eval_ground_truth, from_sexpr
from .learning import HypothesisSpace
from .visarith import DIGIT_FN, DigitListInput, VisArithPlugin

TRUTHS = {"x1": 3, "x2": 0, "x3": 9, "x4": 7}
SETS = {"x1": (3,), "x2": (8, 0), "x3": (9, 6), "x4": (7,)}

PROGRAMS = (
    "(fold inc 0 (filter (pred:> 5) (map @toDigit l)))",
    "(fold inc 0 (filter (pred:> 6) (filter (pred:< 9) (map @toDigit l))))",
    "(fold inc 0 (filter (pred:< 4) (map @toDigit l)))",
    "(fold inc 0 (filter (pred:> 2) (filter (pred:< 8) (map @toDigit l))))",
)


@dataclass
class OverviewFixture:
    plugin: VisArithPlugin
    suite: PredictorSuite
    dom_input: DigitListInput
    programs: list
    hs: HypothesisSpace
    examples: list          # initial IO examples [(input, output)]
    ground_truth: Program
    oracle: "FixtureOracle"


class FixtureOracle:
    def __init__(self, plugin, gt: Program):
        self.plugin = plugin
        self.gt = gt

    def label(self, fn, tok):
        return TRUTHS[tok.token]

    def answer(self, q, dom_input):
        if q.is_io:
            return eval_ground_truth(self.gt, dom_input, self.plugin, self)
        return TRUTHS[q.key]


def overview_fixture() -> OverviewFixture:
    toks = tuple(
        PerceptionInput(token=f"x{i+1}", hidden_truth=TRUTHS[f"x{i+1}"]) for i in range(4)
    )
    model = FixedSetModel(tuple(range(10)), SETS)
    suite = PredictorSuite({DIGIT_FN: ConformalPredictor(model, 0.5, 0.1, 0)}, {})
    for t in toks:
        suite.register(t)
    dom_input = DigitListInput(id="I", elements=toks)
    plugin = VisArithPlugin()
    programs = [from_sexpr(s) for s in PROGRAMS]
    gt = programs[0]
    oracle = FixtureOracle(plugin, gt)
    return OverviewFixture(
        plugin=plugin,
        suite=suite,
        dom_input=dom_input,
        programs=programs,
        hs=HypothesisSpace(list(programs)),
        examples=[(dom_input, 2)],
        ground_truth=gt,
        oracle=oracle,
    )
