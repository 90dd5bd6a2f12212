"""User feedback: label bindings for neural functions, IO examples, and the
constraint algebra used by every semantics rule.

A constraint is a flat conjunction of equalities, represented as a frozenset
of (fn, token, label) triples.  No solver is involved: satisfiability is a
key lookup.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .values import Value

Binding = tuple  # (fn: str, token: str, label: Value)
Constraint = frozenset

EMPTY: Constraint = frozenset()


class Unsat:
    """Singleton marker for an unsatisfiable conjunction."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Unsat"


UNSAT = Unsat()


class FeedbackError(Exception):
    pass


class DuplicateQuestion(FeedbackError):
    pass


class ConflictingAnswer(FeedbackError):
    pass


def constraint(*bindings: Binding) -> Constraint:
    return frozenset(bindings)


def internally_consistent(c: Constraint) -> bool:
    seen = {}
    for fn, tok, label in c:
        key = (fn, tok)
        if key in seen and seen[key] != label:
            return False
        seen[key] = label
    return True


def conjoin(c1: Constraint, c2: Constraint):
    """Merge two constraints; UNSAT if any key ends up with two labels."""
    if c1 is UNSAT or c2 is UNSAT:
        return UNSAT
    merged = c1 if len(c2) <= len(c1) and c2 <= c1 else c1 | c2
    if not internally_consistent(merged):
        return UNSAT
    return merged


@dataclass(frozen=True)
class FeedbackStore:
    """Immutable snapshot of all feedback: neural label bindings keyed by
    (fn, token), IO examples keyed by input id, and the set of answered
    questions.  Updates return a new store."""

    bindings: dict = field(default_factory=dict)       # (fn, token) -> label
    io_examples: tuple = field(default_factory=tuple)  # ((input_id, input, output), ...)
    answered: frozenset = field(default_factory=frozenset)  # (target, key)

    def label(self, fn: str, token: str) -> Optional[Value]:
        return self.bindings.get((fn, token))

    def has(self, fn: str, token: str) -> bool:
        return (fn, token) in self.bindings

    def with_binding(self, fn: str, token: str, label: Value) -> "FeedbackStore":
        old = self.bindings.get((fn, token))
        if old is not None and old != label:
            raise ConflictingAnswer(f"{fn}({token}) already bound to {old!r}")
        new = dict(self.bindings)
        new[(fn, token)] = label
        return replace(self, bindings=new)

    def with_example(self, input_id: str, dom_input, output: Value) -> "FeedbackStore":
        return replace(self, io_examples=self.io_examples + ((input_id, dom_input, output),))

    def mark_answered(self, target: str, key: str) -> "FeedbackStore":
        return replace(self, answered=self.answered | {(target, key)})

    def is_answered(self, target: str, key: str) -> bool:
        return (target, key) in self.answered

    def relevant_key(self, tokens) -> frozenset:
        """Bindings restricted to a token set; the exact memoization key for
        evaluations over inputs built from those tokens."""
        return frozenset(
            (fn, tok, lbl) for (fn, tok), lbl in self.bindings.items() if tok in tokens
        )


def sat(c: Constraint, store: FeedbackStore) -> bool:
    """True iff c conflicts neither with itself nor with the store."""
    if c is UNSAT:
        return False
    if not internally_consistent(c):
        return False
    for fn, tok, label in c:
        stored = store.label(fn, tok)
        if stored is not None and stored != label:
            return False
    return True


def record_answer(store: FeedbackStore, target: str, key: str, dom_input, answer: Value) -> FeedbackStore:
    """Apply one question's answer.  `target` is a neural fn name or
    "synthfunc"; `key` is the perception token or the input id."""
    if store.is_answered(target, key):
        raise DuplicateQuestion(f"{target}({key}) already answered")
    if target == "synthfunc":
        store = store.with_example(key, dom_input, answer)
    else:
        store = store.with_binding(target, key, answer)
    return store.mark_answered(target, key)


def dump_log(store: FeedbackStore) -> str:
    """Line-oriented replay log: one binding per line (fn, token, label)."""
    lines = [f"{fn}\t{tok}\t{label!r}" for (fn, tok), label in sorted(store.bindings.items())]
    return "\n".join(lines) + ("\n" if lines else "")


def load_log(text: str) -> list[Binding]:
    import ast as pyast

    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        fn, tok, label = line.split("\t")
        out.append((fn, tok, pyast.literal_eval(label)))
    return out
