"""The active-learning decision core.

Hypothesis refinement, distinguishability, pruning power, question selection
(worst-case with BCE bounding, expected, random), and the top-level loop.

Evaluation goes through an Engine that memoizes output sets per (program,
input, store-bindings-restricted-to-that-input's-tokens); the key is exact,
so the cache never changes results, it only makes repeated candidate-answer
refinements affordable.
"""
from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import absint, evaluator
from . import feedback as fb
from .domain import DomainPlugin
from .dsl import Program, eval_standard
from .values import sorted_values, value_key


class NoAnswers(Exception):
    pass


class EmptySpace(Exception):
    pass


@dataclass(frozen=True)
class Question:
    """A (function, input) pair.  `target` is a neural fn name or
    "synthfunc"; `key` is the perception token or the input id."""

    qid: int
    target: str
    key: str
    input_id: str

    @property
    def is_io(self) -> bool:
        return self.target == "synthfunc"


@dataclass
class HypothesisSpace:
    programs: list
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.programs)

    def __iter__(self):
        return iter(self.programs)


@dataclass
class SessionConfig:
    seed: int = 0
    strategy: str = "worstcase"  # worstcase | expected | random | standard
    k: Optional[int] = 1
    kprime: float = 1.0
    distinguish_depth: int = 1
    sample_threshold: int = 50
    drop_singleton_questions: bool = False
    use_absint: bool = True
    use_bce: bool = True
    timeout_s: float = 600.0
    max_rounds: Optional[int] = None


class Engine:
    """Evaluation front-end: one place that knows which semantics is active
    (full CCE, the no-absint ablation, or prediction-as-truth) and owns the
    memo table."""

    def __init__(self, plugin: DomainPlugin, predictor, config: SessionConfig,
                 inputs: list, memo: Optional[dict] = None):
        self.plugin = plugin
        self.predictor = predictor
        self.config = config
        self.inputs = {plugin.input_id(i): i for i in inputs}
        self.tokens_of = {plugin.input_id(i): plugin.input_tokens(i) for i in inputs}
        self.token_to_input = {}
        for i in inputs:
            for t in plugin.input_tokens(i):
                self.token_to_input[t] = plugin.input_id(i)
        self._memo: dict = {} if memo is None else memo
        if config.strategy == "standard":
            self._tag = "std"
        else:
            self._tag = "ai" if config.use_absint else "plain"
        self.eval_calls = 0

    def _rel(self, store: fb.FeedbackStore, input_id: str) -> frozenset:
        return store.relevant_key(self.tokens_of[input_id])

    def _unambiguous(self, store: fb.FeedbackStore, input_id: str) -> bool:
        """Every constrained prediction set on this input is a singleton:
        evaluation is deterministic, so abstract filtering buys nothing."""
        from .values import PerceptRef

        key = ("amb", input_id, self._rel(store, input_id))
        got = self._memo.get(key)
        if got is None:
            dom_input = self.inputs[input_id]
            got = all(
                len(self.constrained_labels(fn, tok, store)) <= 1
                for fn, tok in self.plugin.atomic_questions(dom_input)
            )
            self._memo[key] = got
        return got

    # -- output sets ---------------------------------------------------------
    def outputs(self, p: Program, dom_input, store: fb.FeedbackStore) -> frozenset:
        iid = self.plugin.input_id(dom_input)
        key = ("out", self._tag, p.key(), iid, self._rel(store, iid))
        got = self._memo.get(key)
        if got is None:
            self.eval_calls += 1
            if self.config.strategy == "standard":
                got = frozenset([eval_standard(p, dom_input, self.plugin, self.predictor)])
            elif self.config.use_absint and not self._unambiguous(store, iid):
                got = absint.cce(p, store, dom_input, self.plugin, self.predictor)
            else:
                got = absint.cce_plain(p, store, dom_input, self.plugin, self.predictor)
            self._memo[key] = got
        return got

    def check(self, p: Program, dom_input, store: fb.FeedbackStore, expected) -> bool:
        """Membership of `expected` in the constrained output set."""
        iid = self.plugin.input_id(dom_input)
        key = ("chk", self._tag, p.key(), iid, self._rel(store, iid), value_key(expected))
        got = self._memo.get(key)
        if got is None:
            self.eval_calls += 1
            if self.config.strategy == "standard":
                got = eval_standard(p, dom_input, self.plugin, self.predictor) == expected
            elif self.config.use_absint and not self._unambiguous(store, iid):
                got = expected in absint.cce(p, store, dom_input, self.plugin, self.predictor,
                                             expected=expected)
            else:
                got = expected in absint.cce_plain(p, store, dom_input, self.plugin, self.predictor)
            self._memo[key] = got
        return got

    def consistent(self, p: Program, store: fb.FeedbackStore) -> bool:
        for iid, dom_input, expected in store.io_examples:
            if not self.check(p, dom_input, store, expected):
                return False
        return True

    # -- BCE -----------------------------------------------------------------
    def bce_outputs(self, p: Program, dom_input, store: fb.FeedbackStore, seed: int) -> frozenset:
        if not self.config.use_bce:
            return self.outputs(p, dom_input, store)
        iid = self.plugin.input_id(dom_input)
        if self._unambiguous(store, iid):
            return self.outputs(p, dom_input, store)  # all sets singleton: BCE is the identity
        key = ("bce", p.key(), iid, self._rel(store, iid), seed, self.config.k, self.config.kprime)
        got = self._memo.get(key)
        if got is None:
            got = absint.bce(p, store, dom_input, self.plugin, self.predictor,
                             self.config.k, self.config.kprime, rng_seed=seed)
            self._memo[key] = got
        return got

    def bce_consistent(self, p: Program, store: fb.FeedbackStore, seed: int) -> bool:
        for iid, dom_input, expected in store.io_examples:
            if expected not in self.bce_outputs(p, dom_input, store, seed):
                return False
        return True

    # -- answers ---------------------------------------------------------------
    def constrained_labels(self, fn: str, token: str, store: fb.FeedbackStore) -> list:
        from .values import PerceptRef

        pinned = store.label(fn, token)
        labels = self.predictor.predict_set(fn, PerceptRef(token)).labels
        if pinned is None:
            return list(labels)
        return [l for l in labels if l == pinned]

    def question_touches_examples(self, q: Question, store: fb.FeedbackStore) -> bool:
        """A neural answer can only change consistency when its token belongs
        to an input that has an IO example."""
        if q.is_io:
            return True
        example_ids = {iid for iid, _, _ in store.io_examples}
        return q.input_id in example_ids


def bce_seed(session_seed: int, qid: int) -> int:
    h = hashlib.sha256(f"{session_seed}:{qid}".encode()).digest()
    return int.from_bytes(h[:4], "big")


# ---------------------------------------------------------------------------
# question space


def build_questions(inputs: list, plugin: DomainPlugin, predictor,
                    store: fb.FeedbackStore, config: SessionConfig) -> list[Question]:
    """IO questions first (tie-breaks favor them), then neural questions in
    input/token order.  Answered and singleton-prediction questions are
    dropped."""
    from .values import PerceptRef

    questions = []
    qid = 0
    for dom_input in inputs:
        iid = plugin.input_id(dom_input)
        if not store.is_answered("synthfunc", iid):
            questions.append(Question(qid, "synthfunc", iid, iid))
        qid += 1
    if config.strategy != "standard":
        for dom_input in inputs:
            iid = plugin.input_id(dom_input)
            for fn, token in plugin.atomic_questions(dom_input):
                if store.is_answered(fn, token):
                    qid += 1
                    continue
                if config.drop_singleton_questions:
                    if len(predictor.predict_set(fn, PerceptRef(token)).labels) <= 1:
                        qid += 1
                        continue
                questions.append(Question(qid, fn, token, iid))
                qid += 1
    return questions


def possible_answers(q: Question, store: fb.FeedbackStore, engine: Engine,
                     space: list) -> list:
    if q.is_io:
        union = set()
        for p in space:
            union |= engine.outputs(p, engine.inputs[q.input_id], store)
        return sorted_values(union)
    return engine.constrained_labels(q.target, q.key, store)


def _apply_answer(store: fb.FeedbackStore, q: Question, answer, engine: Engine) -> fb.FeedbackStore:
    if q.is_io:
        return store.with_example(q.input_id, engine.inputs[q.input_id], answer)
    return store.with_binding(q.target, q.key, answer)


# ---------------------------------------------------------------------------
# refinement / distinguishability / pruning power


def refine_hs(hs: HypothesisSpace, store: fb.FeedbackStore, engine: Engine) -> HypothesisSpace:
    kept = [p for p in hs.programs if engine.consistent(p, store)]
    return HypothesisSpace(kept, dict(hs.provenance))


def distinguish(p0: Program, others: list, store: fb.FeedbackStore, inputs: list,
                questions: list, engine: Engine, depth: int = 1) -> bool:
    """True iff some program's constrained output set can differ from p0's,
    now or after up to `depth` more answers.  Only neural questions are
    enumerated: IO-example conjuncts never change output sets."""
    ambiguous, _ = distinguish_witness(p0, others, store, inputs, questions, engine, depth)
    return ambiguous


def distinguish_witness(p0: Program, others: list, store: fb.FeedbackStore, inputs: list,
                        questions: list, engine: Engine, depth: int = 1):
    """distinguish() plus a witness question worth asking: for a live
    difference on input I that still has its IO question, that question;
    otherwise an unanswered neural question on I; for a depth-d difference,
    the enabling question."""
    neural_qs = [q for q in questions if not q.is_io]
    for dom_input in inputs:
        base = engine.outputs(p0, dom_input, store)
        for p in others:
            if engine.outputs(p, dom_input, store) != base:
                iid = engine.plugin.input_id(dom_input)
                witness = next((q for q in questions if q.is_io and q.input_id == iid), None)
                if witness is None:
                    witness = next(
                        (q for q in neural_qs if q.input_id == iid
                         and len(engine.constrained_labels(q.target, q.key, store)) > 1),
                        None,
                    )
                return True, witness
    if depth <= 0:
        return False, None
    return _distinguish_rec(p0, others, store, neural_qs, engine, depth, focus=None)


def _distinguish_rec(p0, others, store, neural_qs, engine, depth, focus):
    for idx, q in enumerate(neural_qs):
        if focus is not None and q.input_id != focus:
            continue
        dom_input = engine.inputs[q.input_id]
        answers = engine.constrained_labels(q.target, q.key, store)
        if len(answers) <= 1:
            continue
        for a in answers:
            store2 = store.with_binding(q.target, q.key, a)
            base = engine.outputs(p0, dom_input, store2)
            if any(engine.outputs(p, dom_input, store2) != base for p in others):
                return True, q
            if depth > 1:
                # deeper differences only require more bindings on the same
                # input: sets factor per input over its own tokens
                rest = neural_qs[:idx] + neural_qs[idx + 1:]
                found, w = _distinguish_rec(p0, others, store2, rest, engine,
                                            depth - 1, focus=q.input_id)
                if found:
                    return True, q
    return False, None


def _survivors_exact(q: Question, answer, space: list, store: fb.FeedbackStore,
                     engine: Engine) -> int:
    store2 = _apply_answer(store, q, answer, engine)
    return sum(1 for p in space if engine.consistent(p, store2))


def survivors_by_answer(q: Question, answers: list, space: list,
                        store: fb.FeedbackStore, engine: Engine) -> list[int]:
    """Exact survivor counts per answer.  For IO questions the new example is
    a membership test against each program's output set, so one output-set
    evaluation per program covers every answer."""
    if q.is_io:
        dom_input = engine.inputs[q.input_id]
        counts = [0] * len(answers)
        for p in space:
            if not engine.consistent(p, store):
                continue
            out = engine.outputs(p, dom_input, store)
            for i, a in enumerate(answers):
                if a in out:
                    counts[i] += 1
        return counts
    return [_survivors_exact(q, a, space, store, engine) for a in answers]


def pruning_power(q: Question, hs: HypothesisSpace, store: fb.FeedbackStore,
                  engine: Engine, space: Optional[list] = None) -> float:
    """(|P| - max_a |refine under q=a|) / |P| on the (sampled) space."""
    space = list(hs.programs) if space is None else space
    answers = possible_answers(q, store, engine, space)
    if not answers:
        raise NoAnswers(f"question {q.target}({q.key}) has no possible answers")
    if not space:
        return 0.0
    if not engine.question_touches_examples(q, store) and not q.is_io:
        return 0.0
    worst = max(survivors_by_answer(q, answers, space, store, engine))
    return (len(space) - worst) / len(space)


def sample_space(hs: HypothesisSpace, rng: random.Random, threshold: int) -> list:
    if len(hs) <= threshold:
        return list(hs.programs)
    return rng.sample(sorted(hs.programs, key=lambda p: p.key()), threshold)


# ---------------------------------------------------------------------------
# selection strategies


def _question_order_key(q: Question) -> tuple:
    return (0 if q.is_io else 1, q.qid)


def select_question_worstcase(hs: HypothesisSpace, questions: list,
                              store: fb.FeedbackStore, engine: Engine,
                              session_seed: int = 0,
                              space: Optional[list] = None) -> Optional[Question]:
    q, _ = worstcase_scored(hs, questions, store, engine, session_seed, space)
    return q


def worstcase_scored(hs: HypothesisSpace, questions: list,
                     store: fb.FeedbackStore, engine: Engine,
                     session_seed: int = 0,
                     space: Optional[list] = None):
    """Worklist selection: BCE-derived upper bounds on pruning power, sorted
    descending, with exact evaluation until the running best dominates.
    Returns (question, exact pruning power on the sampled space)."""
    if not questions:
        return None, 0.0
    cfg = engine.config
    rng = random.Random(session_seed ^ 0x5E1EC7)
    space = sample_space(hs, rng, cfg.sample_threshold) if space is None else space
    n = len(space)
    use_bce = cfg.use_bce and cfg.strategy != "standard"
    entries = []
    for q in questions:
        if use_bce and q.is_io:
            # the bound phase unions BCE output sets instead of exact ones;
            # a subset of the answers can only raise the upper bound
            seed = bce_seed(session_seed, q.qid)
            dom_input = engine.inputs[q.input_id]
            union = set()
            for p in space:
                union |= engine.bce_outputs(p, dom_input, store, seed)
            answers = sorted_values(union) or possible_answers(q, store, engine, space)
        else:
            answers = possible_answers(q, store, engine, space)
        if not answers:
            continue
        if n == 0:
            entries.append((q, 0.0))
            continue
        if not q.is_io and not engine.question_touches_examples(q, store):
            entries.append((q, 0.0))
            continue
        if len(answers) <= 1 and not q.is_io:
            entries.append((q, 0.0))
            continue
        if use_bce:
            seed = bce_seed(session_seed, q.qid)
            if q.is_io:
                dom_input = engine.inputs[q.input_id]
                ok_elsewhere = [p for p in space if engine.bce_consistent(p, store, seed)]
                eta = max(
                    sum(1 for p in ok_elsewhere
                        if a in engine.bce_outputs(p, dom_input, store, seed))
                    for a in answers
                )
            else:
                eta = max(
                    sum(1 for p in space
                        if engine.bce_consistent(p, _apply_answer(store, q, a, engine), seed))
                    for a in answers
                )
            beta = (n - eta) / n
        else:
            eta = max(_survivors_exact(q, a, space, store, engine) for a in answers)
            beta = (n - eta) / n
        entries.append((q, beta))
    if not entries:
        return None, 0.0
    entries.sort(key=lambda e: (-e[1],) + _question_order_key(e[0]))
    best_q, best_beta = None, 0.0
    for q, beta in entries:
        if best_q is not None and best_beta >= beta:
            break
        if n == 0:
            continue
        answers = possible_answers(q, store, engine, space)
        if not answers:
            continue
        worst = max(survivors_by_answer(q, answers, space, store, engine))
        exact = (n - worst) / n
        if best_q is None or exact > best_beta:
            best_q, best_beta = q, exact
    if best_q is None:
        return entries[0][0], 0.0
    return best_q, best_beta


def select_question_expected(hs: HypothesisSpace, questions: list,
                             store: fb.FeedbackStore, engine: Engine,
                             session_seed: int = 0,
                             space: Optional[list] = None) -> Optional[Question]:
    q, _ = expected_scored(hs, questions, store, engine, session_seed, space)
    return q


def expected_scored(hs: HypothesisSpace, questions: list,
                    store: fb.FeedbackStore, engine: Engine,
                    session_seed: int = 0,
                    space: Optional[list] = None):
    """Argmax of expected pruning power, weighting answers by the predictor's
    normalized probabilities (uniform for IO questions)."""
    from .values import PerceptRef

    if not questions:
        return None, 0.0
    cfg = engine.config
    rng = random.Random(session_seed ^ 0xE29EC7)
    space = sample_space(hs, rng, cfg.sample_threshold) if space is None else space
    n = len(space)
    best, best_epp = None, -1.0
    for q in sorted(questions, key=_question_order_key):
        answers = possible_answers(q, store, engine, space)
        if not answers or n == 0:
            continue
        if not q.is_io and not engine.question_touches_examples(q, store):
            epp = 0.0
        elif len(answers) <= 1:
            epp = 0.0
        else:
            if q.is_io:
                probs = [1.0 / len(answers)] * len(answers)
            else:
                ps = engine.predictor.predict_set(q.target, PerceptRef(q.key))
                raw = [max(ps.prob_of(a), 1e-9) for a in answers]
                total = sum(raw)
                probs = [r / total for r in raw]
            epp = 0.0
            for pa, kept in zip(probs, survivors_by_answer(q, answers, space, store, engine)):
                epp += pa * (n - kept) / n
        if epp > best_epp:
            best, best_epp = q, epp
    return best, max(best_epp, 0.0)


def select_question_random(questions: list, seed: int) -> Optional[Question]:
    if not questions:
        return None
    rng = random.Random(seed)
    return rng.choice(sorted(questions, key=lambda q: q.qid))


# ---------------------------------------------------------------------------
# top-level loop


@dataclass
class Round:
    index: int
    question: Optional[dict]
    answer: object
    hs_before: int
    hs_after: int
    refine_s: float
    distinguish_s: float
    select_s: float
    total_s: float


@dataclass
class Transcript:
    status: str = "running"  # converged | failed | timeout | exhausted
    rounds: list = field(default_factory=list)
    program: Optional[str] = None
    survivors: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "program": self.program,
            "survivors": self.survivors,
            "meta": self.meta,
            "rounds": [
                {
                    "round": r.index,
                    "question": r.question,
                    "answer": repr(r.answer),
                    "hs_before": r.hs_before,
                    "hs_after": r.hs_after,
                    "timings": {
                        "refine_s": r.refine_s,
                        "distinguish_s": r.distinguish_s,
                        "select_s": r.select_s,
                        "total_s": r.total_s,
                    },
                }
                for r in self.rounds
            ],
        }


class Session:
    """One active-learning session advancing per the top-level loop: refine,
    sample, distinguish, select, query.  Drives either a simulated oracle
    (run()) or an interactive caller (next_question()/submit())."""

    def __init__(self, plugin: DomainPlugin, predictor, hs: HypothesisSpace,
                 inputs: list, initial_examples: list, config: SessionConfig,
                 memo: Optional[dict] = None):
        self.plugin = plugin
        self.config = config
        self.engine = Engine(plugin, predictor, config, inputs, memo=memo)
        self.inputs = inputs
        self.rng = random.Random(config.seed)
        store = fb.FeedbackStore()
        for dom_input, output in initial_examples:
            iid = plugin.input_id(dom_input)
            store = fb.record_answer(store, "synthfunc", iid, dom_input, output)
        self.store = store
        self.questions = build_questions(inputs, plugin, predictor, store, config)
        self.hs = hs
        self.transcript = Transcript()
        self.pending: Optional[Question] = None
        self.round_index = 0
        self._t0 = time.monotonic()
        self._phase = {}
        self.status = "running"
        self.progress = {"stage": "idle", "scored": 0, "total": 0}

    # -- one loop iteration ----------------------------------------------------
    def next_question(self) -> Optional[Question]:
        """Refine + distinguish + select.  Returns None when converged (or
        failed/exhausted); sets self.pending otherwise."""
        cfg = self.config
        if self.status != "running":
            return None
        if cfg.max_rounds is not None and self.round_index >= cfg.max_rounds:
            self.status = "exhausted"
            return self._finish()
        t_round = time.monotonic()
        self.progress = {"stage": "refining", "scored": 0, "total": len(self.hs)}
        t = time.monotonic()
        self.hs = refine_hs(self.hs, self.store, self.engine)
        refine_s = time.monotonic() - t
        hs_before = len(self.hs)
        if len(self.hs) == 0:
            self.status = "failed"
            self._phase = {"refine_s": refine_s, "distinguish_s": 0.0, "select_s": 0.0,
                           "hs_before": hs_before, "t_round": t_round}
            return self._finish()
        if time.monotonic() - self._t0 > cfg.timeout_s:
            self.status = "timeout"
            return self._finish()

        t = time.monotonic()
        progs = sorted(self.hs.programs, key=lambda p: p.key())
        p_prime = self.rng.choice(progs)
        others = [p for p in progs if p is not p_prime]
        self.progress = {"stage": "distinguishing", "scored": 0, "total": len(others)}
        ambiguous, witness = distinguish_witness(p_prime, others, self.store, self.inputs,
                                                 self.questions, self.engine,
                                                 cfg.distinguish_depth)
        distinguish_s = time.monotonic() - t

        if not ambiguous or not self.questions:
            if ambiguous and not self.questions:
                self.status = "exhausted"
            else:
                self.status = "converged"
            self._phase = {"refine_s": refine_s, "distinguish_s": distinguish_s,
                           "select_s": 0.0, "hs_before": hs_before, "t_round": t_round}
            self._returned = p_prime
            return self._finish()

        t = time.monotonic()
        self.progress = {"stage": "selecting", "scored": 0, "total": len(self.questions)}
        q = self._select(witness)
        select_s = time.monotonic() - t
        if q is None:
            self.status = "exhausted"
            self._returned = p_prime
            return self._finish()
        self._phase = {"refine_s": refine_s, "distinguish_s": distinguish_s,
                       "select_s": select_s, "hs_before": hs_before, "t_round": t_round}
        self.pending = q
        self.progress = {"stage": "awaiting_answer", "scored": 0, "total": 0}
        return q

    def _select(self, witness: Optional[Question] = None) -> Optional[Question]:
        cfg = self.config
        if cfg.strategy == "random":
            return select_question_random(self.questions, self.rng.randrange(1 << 30))
        # a fresh per-round sample: a fixed sample can hide minority behaviors
        # for the whole session
        space = sample_space(self.hs, self.rng, cfg.sample_threshold)
        if cfg.strategy == "expected":
            q, score = expected_scored(self.hs, self.questions, self.store,
                                       self.engine, cfg.seed, space=space)
        else:
            q, score = worstcase_scored(self.hs, self.questions, self.store,
                                        self.engine, cfg.seed, space=space)
        # all questions score zero: ask the distinguishing witness instead of
        # the tie-break pick, otherwise the endgame can stall for many rounds
        if score <= 0 and witness is not None:
            live = {qq.qid for qq in self.questions}
            if witness.qid in live:
                return witness
        return q

    def submit(self, answer) -> None:
        q = self.pending
        assert q is not None, "no pending question"
        self.store = fb.record_answer(self.store, q.target, q.key,
                                      self.engine.inputs.get(q.input_id), answer)
        self.questions = [qq for qq in self.questions if qq.qid != q.qid]
        hs_after_store = self.store
        hs_after = len(refine_hs(self.hs, hs_after_store, self.engine))
        ph = self._phase
        self.transcript.rounds.append(Round(
            index=self.round_index,
            question={"target": q.target, "key": q.key, "input_id": q.input_id, "qid": q.qid},
            answer=answer,
            hs_before=ph["hs_before"],
            hs_after=hs_after,
            refine_s=ph["refine_s"],
            distinguish_s=ph["distinguish_s"],
            select_s=ph["select_s"],
            total_s=time.monotonic() - ph["t_round"],
        ))
        self.round_index += 1
        self.pending = None

    def _finish(self) -> None:
        self.transcript.status = self.status
        returned = getattr(self, "_returned", None)
        if returned is None and len(self.hs):
            returned = sorted(self.hs.programs, key=lambda p: p.key())[0]
        self.transcript.program = returned.key() if returned is not None else None
        self.transcript.survivors = [p.key() for p in self.hs.programs]
        self.transcript.meta["rounds"] = self.round_index
        self.transcript.meta["eval_calls"] = self.engine.eval_calls
        return None

    @property
    def returned_program(self) -> Optional[Program]:
        return getattr(self, "_returned", None) or (
            sorted(self.hs.programs, key=lambda p: p.key())[0] if len(self.hs) else None
        )

    def run(self, oracle) -> Transcript:
        while True:
            q = self.next_question()
            if q is None:
                return self.transcript
            answer = oracle.answer(q, self.engine.inputs.get(q.input_id))
            self.submit(answer)


def run_active_learning(plugin: DomainPlugin, predictor, hs: HypothesisSpace,
                        inputs: list, initial_examples: list, oracle,
                        config: SessionConfig):
    """Fig.-7-style loop against an oracle; returns (program, transcript)."""
    session = Session(plugin, predictor, hs, inputs, initial_examples, config)
    transcript = session.run(oracle)
    return session.returned_program, transcript
