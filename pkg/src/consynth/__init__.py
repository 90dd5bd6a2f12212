"""Neurosymbolic active-learning program synthesis under conformal semantics."""

from . import absint, conformal, dsl, evaluator, feedback, learning, objextract, visarith
from .absint import bce, bce_consistent, cce, EmptyAbstraction
from .dsl import Program, ast_size, eval_ground_truth, eval_standard, from_sexpr, to_sexpr
from .evaluator import eval_constrained_ref, is_consistent
from .learning import (
    HypothesisSpace,
    Question,
    Session,
    SessionConfig,
    distinguish,
    pruning_power,
    refine_hs,
    run_active_learning,
    select_question_expected,
    select_question_random,
    select_question_worstcase,
)

__all__ = [
    "absint", "conformal", "dsl", "evaluator", "feedback", "learning",
    "objextract", "visarith",
    "bce", "bce_consistent", "cce", "EmptyAbstraction",
    "Program", "ast_size", "eval_ground_truth", "eval_standard", "from_sexpr", "to_sexpr",
    "eval_constrained_ref", "is_consistent",
    "HypothesisSpace", "Question", "Session", "SessionConfig",
    "distinguish", "pruning_power", "refine_hs", "run_active_learning",
    "select_question_expected", "select_question_random", "select_question_worstcase",
]
