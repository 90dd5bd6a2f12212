"""Synthetic perception models and split-conformal calibration.

Each neural function gets a ScoreModel producing a deterministic
pseudo-softmax per perception input (seeded from the hidden truth plus a
confusion kernel), a nonconformity score `1 - p(label)`, and a
ConformalPredictor whose threshold is the standard ceil((n+1)(1-delta))/n
empirical quantile of calibration scores.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .values import PerceptRef, Value


class EmptyCalibration(Exception):
    pass


@dataclass
class PerceptionInput:
    """One perception input.  `hidden_truth` is read only by the oracle, the
    score models (they stand in for a real sensor), and the harness."""

    token: str
    hidden_truth: Value
    kind: str = "digit"
    render_hint: dict = field(default_factory=dict)
    _payload: Optional[bytes] = None

    @property
    def ref(self) -> PerceptRef:
        return PerceptRef(self.token)

    @property
    def render_payload(self) -> bytes:
        if self._payload is None:
            self._payload = _render(self)
        return self._payload


def _stable_rng(*parts) -> random.Random:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return random.Random(int.from_bytes(h[:8], "big"))


# visually similar digits; the confusion kernel spreads mass over these
_DIGIT_NEIGHBORS = {
    0: (8, 6), 1: (7, 4), 2: (3, 7), 3: (8, 5), 4: (9, 1),
    5: (6, 3), 6: (8, 5), 7: (1, 2), 8: (3, 0), 9: (4, 7),
}


class ScoreModel:
    """Base synthetic classifier: deterministic per-token probabilities,
    nonconformity score = 1 - p(label)."""

    labels: tuple = ()

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._cache: dict[str, dict] = {}

    def _fresh_probs(self, inp: PerceptionInput) -> dict:
        raise NotImplementedError

    def probs(self, inp: PerceptionInput) -> dict:
        got = self._cache.get(inp.token)
        if got is None:
            got = self._fresh_probs(inp)
            self._cache[inp.token] = got
        return got

    def score(self, inp: PerceptionInput, label: Value) -> float:
        return 1.0 - self.probs(inp).get(label, 0.0)

    def top1(self, inp: PerceptionInput) -> Value:
        ps = self.probs(inp)
        return max(self.labels, key=lambda l: ps.get(l, 0.0))


class SyntheticDigitModel(ScoreModel):
    """Digit classifier stand-in.  With probability `error_rate` the top mass
    lands on a visually-adjacent digit instead of the truth."""

    labels = tuple(range(10))

    def __init__(self, seed: int = 0, error_rate: float = 0.13, confusion_mass: float = 0.10):
        super().__init__(seed)
        self.error_rate = error_rate
        self.confusion_mass = confusion_mass

    def _fresh_probs(self, inp: PerceptionInput) -> dict:
        rng = _stable_rng("digit", self.seed, inp.token)
        truth = inp.hidden_truth
        neighbors = _DIGIT_NEIGHBORS[truth]
        wrong = rng.random() < self.error_rate
        deeply_wrong = wrong and rng.random() < 0.4
        top = rng.choice(neighbors) if wrong else truth
        top_p = rng.uniform(0.55, 0.80) if wrong else rng.uniform(0.70, 0.92)
        probs = {d: 0.0 for d in self.labels}
        probs[top] = top_p
        rest = 1.0 - top_p
        # confusion kernel: most of the remainder goes to the truth (when the
        # model is wrong but not hopeless) and to the top label's lookalikes
        runners = [truth] if wrong and not deeply_wrong else []
        if not wrong:
            runners = list(neighbors)
        for d in _DIGIT_NEIGHBORS[top]:
            if d not in runners and d != top:
                runners.append(d)
        if deeply_wrong and truth in runners:
            runners.remove(truth)
        shares = [rng.uniform(0.5, 1.0) for _ in runners]
        kernel = rest * (1.0 - self.confusion_mass)
        for d, s in zip(runners, shares):
            probs[d] += kernel * s / sum(shares)
        # graded tail so prediction sets grow smoothly as the threshold drops
        leftover = 1.0 - sum(probs.values())
        others = [d for d in self.labels if d != top]
        weights = [rng.uniform(0.02, 1.0) ** 2 for _ in others]
        for d, w in zip(others, weights):
            probs[d] += leftover * w / sum(weights)
        return probs


class BinaryAttributeModel(ScoreModel):
    """Binary attribute classifier stand-in with a Bernoulli confusion rate."""

    labels = (False, True)

    def __init__(self, seed: int = 0, flip_rate: float = 0.08):
        super().__init__(seed)
        self.flip_rate = flip_rate

    def _fresh_probs(self, inp: PerceptionInput) -> dict:
        rng = _stable_rng("binary", self.seed, inp.token)
        truth = bool(inp.hidden_truth)
        wrong = rng.random() < self.flip_rate
        top = (not truth) if wrong else truth
        top_p = rng.uniform(0.55, 0.75) if wrong else rng.uniform(0.75, 0.97)
        return {top: top_p, (not top): 1.0 - top_p}


class FixedSetModel(ScoreModel):
    """Pinned prediction sets for fixtures: labels inside a token's set score
    below any threshold in (0,1), labels outside score above it."""

    def __init__(self, labels: tuple, sets: dict, probs: Optional[dict] = None):
        super().__init__(0)
        self.labels = labels
        self.sets = {tok: tuple(s) for tok, s in sets.items()}
        self.fixed_probs = probs or {}

    def _fresh_probs(self, inp: PerceptionInput) -> dict:
        inside = self.sets[inp.token]
        given = self.fixed_probs.get(inp.token)
        probs = {l: 0.0 for l in self.labels}
        for i, l in enumerate(inside):
            probs[l] = given[i] if given else (0.9 ** i) * 0.5
        total = sum(probs.values())
        return {l: p / total for l, p in probs.items()}

    def score(self, inp: PerceptionInput, label: Value) -> float:
        return 0.1 if label in self.sets[inp.token] else 0.9


@dataclass(frozen=True)
class PredictionSet:
    labels: tuple
    probs: tuple  # normalized over `labels`, aligned

    def prob_of(self, label) -> float:
        for l, p in zip(self.labels, self.probs):
            if l == label:
                return p
        return 0.0


class ConformalPredictor:
    """Split-conformal predictor: {y : s(x,y) <= tau} with tau the
    ceil((n+1)(1-delta))/n empirical quantile of calibration scores."""

    def __init__(self, model: ScoreModel, tau: float, delta: float, calibration_size: int):
        self.model = model
        self.tau = tau
        self.delta = delta
        self.calibration_size = calibration_size

    def predict_set(self, inp: PerceptionInput) -> PredictionSet:
        probs = self.model.probs(inp)
        labels = [l for l in self.model.labels if self.model.score(inp, l) <= self.tau]
        labels.sort(key=lambda l: -probs.get(l, 0.0))
        total = sum(probs.get(l, 0.0) for l in labels)
        if total <= 0:
            ps = tuple(1.0 / len(labels) for _ in labels) if labels else ()
        else:
            ps = tuple(probs.get(l, 0.0) / total for l in labels)
        return PredictionSet(tuple(labels), ps)

    def top1(self, inp: PerceptionInput) -> Value:
        return self.model.top1(inp)


def calibrate(model: ScoreModel, calib, delta: float) -> ConformalPredictor:
    """calib: sequence of (PerceptionInput, true_label)."""
    calib = list(calib)
    if not calib:
        raise EmptyCalibration("calibration set is empty")
    if not (0 < delta <= 1):
        raise ValueError("delta must be in (0, 1]")
    scores = sorted(model.score(x, y) for x, y in calib)
    n = len(scores)
    k = math.ceil((n + 1) * (1 - delta))
    if k <= 0:
        tau = float("-inf")
    elif k > n:
        tau = float("inf")
    else:
        tau = scores[k - 1]
    return ConformalPredictor(model, tau, delta, n)


class PredictorSuite:
    """Per-neural-function predictors with per-(fn, token) memoization and an
    optional forced-coverage mode that unions the oracle label into every
    prediction set (used to test the deterministic convergence guarantee
    separately from the probabilistic coverage guarantee)."""

    def __init__(self, predictors: dict[str, ConformalPredictor],
                 token_index: dict[str, PerceptionInput],
                 forced_coverage: bool = False,
                 truth_fn: Optional[Callable] = None):
        self.predictors = predictors
        self.token_index = token_index
        self.forced_coverage = forced_coverage
        self.truth_fn = truth_fn
        self._memo: dict[tuple, PredictionSet] = {}

    def register(self, inp: PerceptionInput):
        self.token_index[inp.token] = inp

    def _input(self, tok: PerceptRef) -> PerceptionInput:
        return self.token_index[tok.token]

    def predict_set(self, fn: str, tok: PerceptRef) -> PredictionSet:
        key = (fn, tok.token)
        got = self._memo.get(key)
        if got is not None:
            return got
        inp = self._input(tok)
        ps = self.predictors[fn].predict_set(inp)
        if self.forced_coverage:
            truth = self.truth_fn(fn, inp) if self.truth_fn else inp.hidden_truth
            if truth not in ps.labels:
                labels = ps.labels + (truth,)
                probs = tuple(p * (1 - 1e-6) for p in ps.probs) + (1e-6,)
                ps = PredictionSet(labels, probs)
        self._memo[key] = ps
        return ps

    def top1(self, fn: str, tok: PerceptRef) -> Value:
        return self.predictors[fn].top1(self._input(tok))

    def label_space(self, fn: str) -> tuple:
        return tuple(self.predictors[fn].model.labels)


# ---------------------------------------------------------------------------
# rendering (opaque payload bytes for the UI)

def _render(inp: PerceptionInput) -> bytes:
    if inp.kind == "digit":
        return _render_digit(inp)
    return json.dumps({"kind": inp.kind, **inp.render_hint}).encode()


def _render_digit(inp: PerceptionInput) -> bytes:
    from io import BytesIO

    from PIL import Image, ImageDraw

    rng = _stable_rng("render", inp.token)
    img = Image.new("L", (28, 28), color=255)
    draw = ImageDraw.Draw(img)
    draw.text((7 + rng.randint(-2, 2), 5 + rng.randint(-2, 2)), str(inp.hidden_truth), fill=0)
    for _ in range(12):
        x, y = rng.randint(0, 27), rng.randint(0, 27)
        img.putpixel((x, y), rng.randint(180, 240))
    buf = BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# versioned JSON config

def suite_from_config(cfg: dict, token_index=None) -> PredictorSuite:
    """Build a predictor suite from a config dict:

    {"version": 1, "delta": 0.1, "seed": 0,
     "models": {"toDigit": {"kind": "digit", "error_rate": 0.13},
                "exists":  {"kind": "binary", "flip_rate": 0.08}},
     "calibration_size": 500}
    """
    if cfg.get("version") != 1:
        raise ValueError(f"unsupported conformal config version {cfg.get('version')!r}")
    delta = cfg.get("delta", 0.1)
    seed = cfg.get("seed", 0)
    n = cfg.get("calibration_size", 500)
    predictors = {}
    for fn, mc in cfg["models"].items():
        kind = mc["kind"]
        if kind == "digit":
            model = SyntheticDigitModel(
                seed=mc.get("seed", seed),
                error_rate=mc.get("error_rate", 0.13),
                confusion_mass=mc.get("confusion_mass", 0.10),
            )
            calib = _digit_calibration(model, n, seed)
        elif kind == "binary":
            model = BinaryAttributeModel(seed=mc.get("seed", seed), flip_rate=mc.get("flip_rate", 0.08))
            calib = _binary_calibration(model, n, seed)
        else:
            raise ValueError(f"unknown model kind {kind!r}")
        predictors[fn] = calibrate(model, calib, mc.get("delta", delta))
    return PredictorSuite(predictors, token_index if token_index is not None else {})


def _digit_calibration(model, n, seed):
    rng = _stable_rng("calib-digit", seed)
    out = []
    for i in range(n):
        truth = rng.randrange(10)
        inp = PerceptionInput(token=f"calib-d{i}", hidden_truth=truth)
        out.append((inp, truth))
    return out


def _binary_calibration(model, n, seed):
    rng = _stable_rng("calib-bin", seed)
    out = []
    for i in range(n):
        truth = rng.random() < 0.5
        inp = PerceptionInput(token=f"calib-b{i}", hidden_truth=truth, kind="attr")
        out.append((inp, truth))
    return out


def load_suite(path) -> PredictorSuite:
    with open(path) as f:
        return suite_from_config(json.load(f))
