import hypothesis.strategies as st
import pytest
from hypothesis import given

from consynth import feedback as fb


def store_with(*bindings):
    s = fb.FeedbackStore()
    for fn, tok, label in bindings:
        s = s.with_binding(fn, tok, label)
    return s


def test_sat_matching_binding():
    s = store_with(("toDigit", "x2", 0))
    assert fb.sat(fb.constraint(("toDigit", "x2", 0)), s)


def test_sat_conflicting_binding():
    # after the user labels x2 as 0, label 8 becomes infeasible
    s = store_with(("toDigit", "x2", 0))
    assert not fb.sat(fb.constraint(("toDigit", "x2", 8)), s)


def test_sat_internal_conflict():
    c = fb.constraint(("toDigit", "x1", 3), ("toDigit", "x1", 7))
    assert not fb.sat(c, fb.FeedbackStore())


def test_conjoin_identity_disjoint_conflict():
    a = fb.constraint(("f", "x", 3))
    assert fb.conjoin(fb.EMPTY, a) == a
    b = fb.constraint(("f", "y", 7))
    assert fb.conjoin(a, b) == a | b
    assert fb.conjoin(a, fb.constraint(("f", "x", 4))) is fb.UNSAT


def test_record_answer_binding_and_example():
    s = fb.FeedbackStore()
    s = fb.record_answer(s, "toDigit", "x2", None, 0)
    assert s.label("toDigit", "x2") == 0
    s = fb.record_answer(s, "synthfunc", "I", "input-obj", 2)
    assert s.io_examples == (("I", "input-obj", 2),)
    with pytest.raises(fb.DuplicateQuestion):
        fb.record_answer(s, "toDigit", "x2", None, 0)


def test_conflicting_answer_is_hard_error():
    s = store_with(("toDigit", "x2", 0))
    with pytest.raises(fb.ConflictingAnswer):
        s.with_binding("toDigit", "x2", 8)


bindings_st = st.lists(
    st.tuples(st.sampled_from(["f", "g"]), st.sampled_from(["a", "b", "c"]),
              st.integers(0, 3)),
    max_size=5,
).map(lambda bs: frozenset(bs))


@given(bindings_st, bindings_st)
def test_conjoin_commutative(c1, c2):
    assert fb.conjoin(c1, c2) == fb.conjoin(c2, c1)


@given(bindings_st, bindings_st, bindings_st)
def test_conjoin_associative_up_to_unsat(c1, c2, c3):
    def norm(x):
        return "UNSAT" if x is fb.UNSAT else x

    left = fb.conjoin(fb.conjoin(c1, c2), c3)
    right = fb.conjoin(c1, fb.conjoin(c2, c3))
    assert norm(left) == norm(right)


@given(bindings_st)
def test_conjoin_idempotent(c):
    assert fb.conjoin(c, c) == c or fb.conjoin(c, c) is fb.UNSAT


@given(bindings_st, st.lists(st.tuples(st.sampled_from(["f", "g"]),
                                       st.sampled_from(["a", "b", "c"]),
                                       st.integers(0, 3)), max_size=4))
def test_sat_monotone_decreasing(c, extra):
    """If c is sat against a bigger store, it is sat against the smaller one."""
    base = fb.FeedbackStore()
    bigger = base
    for fn, tok, label in extra:
        try:
            bigger = bigger.with_binding(fn, tok, label)
        except fb.ConflictingAnswer:
            pass
    if fb.sat(c, bigger):
        assert fb.sat(c, base)


def test_log_round_trip():
    s = store_with(("toDigit", "x1", 3), ("exists", "o1", True))
    text = fb.dump_log(s)
    loaded = fb.load_log(text)
    assert set(loaded) == {("toDigit", "x1", 3), ("exists", "o1", True)}
