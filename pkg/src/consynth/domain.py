"""Domain plugin contract.

A domain supplies its symbolic op table, its neural functions, an abstract
domain, a program enumerator, and rendering/input-space hooks.  Every
evaluator in the engine is written against this surface.

Symbolic ops receive an EvalCtx and a list of already-evaluated argument
values and return a list of (value, constraint) outcomes.  Most ops are
deterministic and return a singleton with the empty constraint; ops that
apply a neural function value (map over a digit classifier, a neural
attribute set) expand into one outcome per surviving label combination.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import feedback as fb
from .values import FnVal, PerceptRef, Value


@dataclass(frozen=True)
class NeuralFn:
    """One registered perception function."""

    name: str
    labels: tuple                      # finite, nonempty label space
    composite: bool = False            # outcomes carry multi-binding constraints


class DomainPlugin:
    """Base class; concrete domains override the hooks they need."""

    name = "abstract"

    def __init__(self):
        self.ops: dict[str, Callable] = {}
        self.neural: dict[str, NeuralFn] = {}

    # -- symbolic functions ------------------------------------------------
    def apply_op(self, op: str, args: list, ctx: "EvalCtx") -> list[tuple]:
        impl = self.ops.get(op)
        if impl is None:
            raise KeyError(op)
        return impl(ctx, args)

    def fn_value(self, name: str) -> FnVal:
        raise NotImplementedError

    def apply_fn_concrete(self, f: FnVal, arg: Value) -> Value:
        raise NotImplementedError

    # -- neural functions ----------------------------------------------------
    def neural_fn(self, fn: str) -> NeuralFn:
        return self.neural[fn]

    def neural_single(self, fn: str, tok: PerceptRef, atomic_label_of) -> Value:
        """Single-valued result of a neural call given an atomic-label
        resolver (top-1 or oracle).  Composite functions aggregate."""
        return atomic_label_of(fn, tok)

    def neural_outcomes(self, fn: str, tok: PerceptRef, ctx: "EvalCtx") -> list[tuple]:
        """Constrained conformal outcomes of one neural call: a list of
        (value, constraint) pairs, already filtered against the store."""
        nf = self.neural.get(fn)
        if nf is None:
            raise KeyError(fn)
        labels = ctx.constrained_labels(fn, tok)
        return [(lbl, fb.constraint((fn, tok.token, lbl))) for lbl in labels]

    # -- inputs --------------------------------------------------------------
    def input_value(self, dom_input) -> Value:
        """The Value bound to the program parameter for this input."""
        raise NotImplementedError

    def atomic_questions(self, dom_input):
        """(fn, token) pairs a user can be asked about, in stable order."""
        raise NotImplementedError

    def input_tokens(self, dom_input) -> frozenset:
        """All perception token ids reachable from this input."""
        raise NotImplementedError

    def input_id(self, dom_input) -> str:
        raise NotImplementedError

    # -- abstract domain -----------------------------------------------------
    def abstract_context(self, dom_input, ctx: "EvalCtx"):
        raise NotImplementedError

    # -- enumeration / rendering ----------------------------------------------
    def enumerate_programs(self, grammar_config, max_size: int):
        raise NotImplementedError

    def render_question(self, question, dom_input) -> dict:
        raise NotImplementedError


class EvalCtx:
    """Per-evaluation context: the domain input, the feedback store, and the
    label resolver that distinguishes the three semantics.

    resolver(fn, tok) returns the full outcome list for one neural call:
      - standard:     [(top-1 label, empty)]
      - ground truth: [(oracle label, empty)]
      - constrained:  plugin.neural_outcomes (prediction set filtered by Φ)
    """

    def __init__(self, plugin: DomainPlugin, dom_input, store: fb.FeedbackStore,
                 resolver=None, predictor=None):
        self.plugin = plugin
        self.input = dom_input
        self.store = store
        self.predictor = predictor
        self._resolver = resolver

    def neural_outcomes(self, fn: str, tok: PerceptRef) -> list[tuple]:
        if self._resolver is not None:
            return self._resolver(fn, tok)
        return self.plugin.neural_outcomes(fn, tok, self)

    def constrained_labels(self, fn: str, tok: PerceptRef) -> list:
        """Prediction-set labels consistent with the store for an atomic
        neural function (the Neural rule's { O in ν̃(I) : SAT(ν(I)=O ∧ Φ) })."""
        pinned = self.store.label(fn, tok.token)
        labels = self.predictor.predict_set(fn, tok).labels
        if pinned is None:
            return list(labels)
        return [lbl for lbl in labels if lbl == pinned]

    def apply_fn(self, f: FnVal, arg: Value) -> list[tuple]:
        """Apply a function value to one argument; neural function values
        expand into per-label outcomes."""
        if f.tag == "neural":
            if not isinstance(arg, PerceptRef):
                raise TypeError(f"neural fn {f.name} applied to {arg!r}")
            return self.neural_outcomes(f.name, arg)
        return [(self.plugin.apply_fn_concrete(f, arg), fb.EMPTY)]
