"""Runtime values flowing through DSL programs.

Values are ordinary Python immutables wherever possible: ints and bools for
scalars, tuples for lists, frozensets for object sets.  The two structured
variants below cover perception-input references and first-class function
values (the function arguments of map/filter/fold).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

Value = Any


@dataclass(frozen=True, order=True)
class PerceptRef:
    """Reference to one perception input (an image token, an object crop...)."""

    token: str


@dataclass(frozen=True, order=True)
class FnVal:
    """A first-class function value: primitive, curried primitive, predicate,
    or a neural classifier used as a mapper."""

    tag: str               # "prim" | "curry" | "pred" | "neural"
    name: str              # e.g. "plus", "<=", "toDigit"
    arg: Value = None      # captured constant for curry/pred forms


# Masked lists keep one slot per original element; filtering marks slots
# absent instead of dropping them (the abstract domain is length-preserving
# and the consistency filter compares slot by slot).
MaskedList = tuple  # of (Value, bool) pairs


def masked(items) -> MaskedList:
    return tuple((v, True) for v in items)


def present_items(lst: MaskedList) -> list:
    return [v for v, p in lst if p]


def is_masked_list(v) -> bool:
    return (
        isinstance(v, tuple)
        and all(isinstance(e, tuple) and len(e) == 2 and isinstance(e[1], bool) for e in v)
        and len(v) > 0
    )


def project_value(v: Value) -> Value:
    """Collapse engine-internal representations to the user-facing value."""
    if is_masked_list(v):
        return tuple(present_items(v))
    return v


def value_key(v: Value):
    """Total order key within and across tags, for canonical set output."""
    if isinstance(v, bool):
        return (0, int(v))
    if isinstance(v, int):
        return (1, v)
    if isinstance(v, PerceptRef):
        return (2, v.token)
    if isinstance(v, FnVal):
        return (3, v.tag, v.name, value_key(v.arg) if v.arg is not None else ())
    if isinstance(v, frozenset):
        return (4, tuple(sorted(value_key(e) for e in v)))
    if isinstance(v, tuple):
        return (5, tuple(value_key(e) for e in v))
    if v is None:
        return (6,)
    return (7, repr(v))


def sorted_values(vs) -> list:
    return sorted(vs, key=value_key)
