"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured numbers (run with `pytest tests/test_acceptance.py -v -s`).

The convergence, strategy-ordering, and ablation runs are the slow ones;
everything shares module-scoped fixtures where baskets overlap.
"""
import itertools
import random
import statistics
import time

import numpy as np
import pytest

from consynth import feedback as fb
from consynth.absint import EmptyAbstraction, TOP, backward_ai, bce, cce, forward_ai
from consynth.domain import EvalCtx
from consynth.dsl import eval_ground_truth, from_sexpr
from consynth.evaluator import eval_constrained_ref, is_consistent
from consynth.fixtures import overview_fixture
from consynth.harness import (
    RunConfig, SimulatedOracle, _conformal_config, benchmark_ids, run_benchmark,
    run_scaling,
)
from consynth.learning import Session, SessionConfig, pruning_power
from consynth.conformal import suite_from_config

from tests.conftest import RandomVisArithEnv, all_valuations, node_values, small_program_pool

SUITE_IDS = benchmark_ids("visarith")[:20]
SEEDS_FULL = (0, 1, 2, 3, 4)
SEEDS_TREND = (0, 1)


def report(name, ok, detail):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print("\n" + line)
    assert ok, line


# ---------------------------------------------------------------------------
# shared expensive runs


@pytest.fixture(scope="module")
def convergence_rows():
    rows = []
    for b in SUITE_IDS:
        for s in SEEDS_FULL:
            cfg = RunConfig(domain="visarith", forced_coverage=True,
                            strategy="worstcase", seeds=(s,))
            rows.append(run_benchmark("visarith", b, s, cfg)["row"])
    return rows


def _strategy_rounds(strategy):
    rounds = []
    for b in SUITE_IDS:
        for s in SEEDS_TREND:
            cfg = RunConfig(domain="visarith", forced_coverage=True,
                            strategy=strategy, seeds=(s,))
            rounds.append(run_benchmark("visarith", b, s, cfg)["row"]["rounds"])
    return rounds


# ---------------------------------------------------------------------------
# 1. CCE oracle equivalence


def _objextract_setup(seed, count=6, max_objects=5, vocab=("person", "bicycle", "helmet", "car")):
    from consynth.objextract import (ObjExtractPlugin, ObjxGrammarConfig,
                                     enumerate_objx, register_scenes, synth_scene_generator)

    plugin = ObjExtractPlugin(vocab)
    suite = suite_from_config(_conformal_config("objextract", 0.1, seed, None))
    scenes = synth_scene_generator(seed=seed, vocab=vocab, count=count,
                                   min_objects=2, max_objects=max_objects)
    register_scenes(scenes, suite, plugin)
    progs = enumerate_objx(plugin, ObjxGrammarConfig(attrs=vocab[:3]), 14)
    return plugin, suite, scenes, progs


def _random_objx_store(rng, plugin, suite, scene, pins=3):
    store = fb.FeedbackStore()
    for tok in rng.sample(sorted(plugin.input_tokens(scene)), min(pins, 3)):
        ch = "exists" if tok.endswith(":exists") else "attr"
        if rng.random() < 0.85:
            label = suite.token_index[tok].hidden_truth
        else:
            label = not suite.token_index[tok].hidden_truth
        store = store.with_binding(ch, tok, label)
    return store


def test_criterion_cce_oracle_equivalence(small_pool):
    t0 = time.monotonic()
    n_vis = 0
    for seed in range(200):
        env = RandomVisArithEnv(seed)
        p = env.random_program(small_pool)
        assert cce(p, env.store, env.dom_input, env.plugin, env.suite) == \
            eval_constrained_ref(p, env.store, env.dom_input, env.plugin, env.suite), seed
        n_vis += 1
    plugin, suite, scenes, progs = _objextract_setup(77)
    rng = random.Random(0)
    n_obj = 0
    for _ in range(100):
        p = rng.choice(progs)
        sc = rng.choice(scenes)
        store = _random_objx_store(rng, plugin, suite, sc)
        assert cce(p, store, sc, plugin, suite) == \
            eval_constrained_ref(p, store, sc, plugin, suite)
        n_obj += 1
    dt = time.monotonic() - t0
    report("cce-oracle-equivalence", dt < 60,
           f"{n_vis} visarith + {n_obj} objextract triples exact in {dt:.1f}s")


# ---------------------------------------------------------------------------
# 2. BCE properties


def test_criterion_bce_properties(small_pool):
    subset_ok = unbounded_ok = implication_checked = 0
    for seed in range(350):
        env = RandomVisArithEnv(seed + 9000)
        p = env.random_program(small_pool)
        full = cce(p, env.store, env.dom_input, env.plugin, env.suite)
        sampled = bce(p, env.store, env.dom_input, env.plugin, env.suite, k=1, rng_seed=seed)
        assert sampled <= full, seed
        subset_ok += 1
        if seed % 7 == 0:
            assert bce(p, env.store, env.dom_input, env.plugin, env.suite,
                       k=None, kprime=1.0, rng_seed=seed) == full
            unbounded_ok += 1
        out = sorted(full)
        if out:
            store = env.store.with_example(env.dom_input.id, env.dom_input, out[0])
            from consynth.absint import bce_consistent

            if bce_consistent(p, store, env.plugin, env.suite, k=1, rng_seed=seed):
                assert is_consistent(p, store, env.plugin, env.suite), seed
                implication_checked += 1
    plugin, suite, scenes, progs = _objextract_setup(78, max_objects=3)
    rng = random.Random(1)
    for i in range(150):
        p = rng.choice(progs)
        sc = rng.choice(scenes)
        store = _random_objx_store(rng, plugin, suite, sc)
        full = cce(p, store, sc, plugin, suite)
        assert bce(p, store, sc, plugin, suite, k=1, rng_seed=i) <= full
        subset_ok += 1
    report("bce-properties", subset_ok >= 500,
           f"{subset_ok} subset checks, {unbounded_ok} unbounded-equality, "
           f"{implication_checked} consistency implications")


# ---------------------------------------------------------------------------
# 3. Abstract soundness


def _objx_node_values(p, valuation, plugin, scene):
    """Per-node concrete values for one full labeling of the used channels."""
    from consynth.dsl import Const, Let, NeuralApp, Seq, SymApp, Var

    def atomic(fn, tok):
        return valuation[tok.token]

    ctx = EvalCtx(plugin, scene, fb.FeedbackStore(),
                  resolver=lambda fn, tok: [(plugin.neural_single(fn, tok, atomic), fb.EMPTY)])
    values = {}

    def go(node, bindings):
        if isinstance(node, Const):
            v = node.value
        elif isinstance(node, Var):
            v = bindings[node.name]
        elif isinstance(node, NeuralApp):
            tok = go(node.arg, bindings)
            v = ctx.neural_outcomes(node.fn, tok)[0][0]
        elif isinstance(node, SymApp):
            args = [go(a, bindings) for a in node.args]
            v = plugin.apply_op(node.op, args, ctx)[0][0]
        else:
            raise TypeError(node)
        values[p.node_id(node)] = v
        return v

    bindings = {p.param: plugin.input_value(scene)}
    stmt = p.body
    while isinstance(stmt, Seq):
        if isinstance(stmt.first, Let):
            bindings[stmt.first.name] = go(stmt.first.expr, bindings)
        stmt = stmt.rest
    go(stmt.expr if isinstance(stmt, Let) else stmt, bindings)
    return values


def _objx_valuations(p, plugin, suite, scene, store, cap=512):
    from consynth.dsl import neural_fns_used

    channels = set()
    for fn in neural_fns_used(p):
        channels.add("exists" if fn == "segment" else "attr")
        if fn.startswith("attrset:"):
            channels.add(("attr", fn.split(":", 1)[1]))
    ctx = EvalCtx(plugin, scene, store, predictor=suite)
    options = []
    for obj in scene.objects:
        tok = scene.exists_tokens[obj.oid]
        labels = ctx.constrained_labels("exists", tok.ref)
        options.append([(tok.token, l) for l in labels])
        for a in scene.vocab:
            if ("attr", a) not in channels:
                continue
            t2 = scene.attr_tokens[(obj.oid, a)]
            labels = ctx.constrained_labels("attr", t2.ref)
            options.append([(t2.token, l) for l in labels])
    total = 1
    for o in options:
        total *= max(len(o), 1)
    if total > cap or any(not o for o in options):
        return None
    return [dict(c) for c in itertools.product(*options)]


def test_criterion_abstract_soundness(small_pool):
    # pinned worked values first: fold-sum backward [8,14] meet [6,8] = [8,8],
    # and the plus/times chain giving [8,8]/[2,2]/[4,4]
    fx = overview_fixture()
    actx = fx.plugin.abstract_context(
        fx.dom_input, EvalCtx(fx.plugin, fx.dom_input, fb.FeedbackStore(), predictor=fx.suite))
    chi = actx.inverse_op("fold", 2, ("int", 16, 16),
                          [("fn", "prim", "plus", None), ("int", 0, 0),
                           ("list", ((6, 8, True), (2, 8, True)))])
    assert chi[1][0] == (8, 14, True)
    assert actx.meet(chi, ("list", ((6, 8, True), (2, 8, True))))[1][0] == (8, 8, True)

    vis_checked = 0
    for seed in range(200):
        env = RandomVisArithEnv(seed + 12000, allow_infeasible_pins=False)
        p = env.random_program(small_pool)
        valuations = list(all_valuations(env))
        if not valuations:
            continue
        actx = env.plugin.abstract_context(
            env.dom_input, EvalCtx(env.plugin, env.dom_input, env.store, predictor=env.suite))
        ann = forward_ai(p, env.store, env.dom_input, env.plugin, env.suite)
        for valuation in valuations:
            vals = node_values(p, valuation, env)
            for nid, v in vals.items():
                th = ann.theta.get(nid, TOP)
                assert th is TOP or actx.member(v, th), ("fwd", seed, nid)
        from consynth.absint import result_node

        out_val = node_values(p, valuations[0], env)[p.node_id(result_node(p))]
        ann[ann.root_node] = actx.meet_or_top(ann[ann.root_node], actx.alpha([out_val]))
        backward_ai(p, ann, env.dom_input, env.store, env.plugin, env.suite)
        for valuation in valuations:
            vals = node_values(p, valuation, env)
            if vals[p.node_id(result_node(p))] != out_val:
                continue
            for nid, v in vals.items():
                th = ann.theta.get(nid, TOP)
                assert th is TOP or actx.member(v, th), ("bwd", seed, nid)
        vis_checked += 1

    plugin, suite, scenes, progs = _objextract_setup(79, max_objects=3)
    rng = random.Random(3)
    obj_checked = 0
    while obj_checked < 200:
        p = rng.choice(progs)
        sc = rng.choice(scenes)
        store = _random_objx_store(rng, plugin, suite, sc, pins=2)
        valuations = _objx_valuations(p, plugin, suite, sc, store)
        if not valuations:
            continue
        actx = plugin.abstract_context(sc, EvalCtx(plugin, sc, store, predictor=suite))
        try:
            ann = forward_ai(p, store, sc, plugin, suite)
        except EmptyAbstraction:
            continue
        from consynth.absint import result_node

        out_val = _objx_node_values(p, valuations[0], plugin, sc)[p.node_id(result_node(p))]
        try:
            ann[ann.root_node] = actx.meet_or_top(ann[ann.root_node], actx.alpha([out_val]))
            backward_ai(p, ann, sc, store, plugin, suite)
        except EmptyAbstraction:
            pytest.fail("reachable output judged unreachable (objextract)")
        for valuation in valuations:
            vals = _objx_node_values(p, valuation, plugin, sc)
            if vals[p.node_id(result_node(p))] != out_val:
                continue
            for nid, v in vals.items():
                th = ann.theta.get(nid, TOP)
                assert th is TOP or actx.member(v, th), (p.key(), nid)
        obj_checked += 1
    report("abstract-soundness", vis_checked >= 150 and obj_checked >= 200,
           f"{vis_checked} visarith + {obj_checked} objextract instances, "
           "worked values exact")


# ---------------------------------------------------------------------------
# 4. Conformal coverage


def test_criterion_conformal_coverage():
    from consynth.conformal import PerceptionInput, SyntheticDigitModel, calibrate

    rng = random.Random(11)
    model = SyntheticDigitModel(seed=11)
    cal = [PerceptionInput(token=f"acc-c{i}", hidden_truth=rng.randrange(10)) for i in range(500)]
    test = [PerceptionInput(token=f"acc-t{i}", hidden_truth=rng.randrange(10)) for i in range(1000)]
    results = {}
    for delta in (0.05, 0.1):
        pred = calibrate(model, [(t, t.hidden_truth) for t in cal], delta)
        cov = sum(t.hidden_truth in pred.predict_set(t).labels for t in test) / len(test)
        results[delta] = cov
        assert cov >= 1 - delta - 0.03, (delta, cov)
    report("conformal-coverage", True,
           ", ".join(f"delta={d}: {c:.3f}" for d, c in results.items()))


# ---------------------------------------------------------------------------
# 5. Convergence guarantee


def test_criterion_convergence_guarantee(convergence_rows):
    t_total = sum(r["total_s"] for r in convergence_rows)
    solved = [r for r in convergence_rows if r["solved"]]
    ok = len(solved) == len(convergence_rows) == len(SUITE_IDS) * len(SEEDS_FULL)
    report("convergence-guarantee", ok and t_total < 600,
           f"{len(solved)}/{len(convergence_rows)} runs ground-truth-equivalent, "
           f"{t_total:.0f}s total")


# ---------------------------------------------------------------------------
# 6. Question-selection optimality


def test_criterion_selection_optimality():
    from consynth.harness import build_env

    sessions = 0
    rounds_checked = 0
    for bench, seed in [("va-16", 0), ("va-16", 1), ("va-22", 0), ("va-22", 1),
                        ("va-25", 0), ("va-25", 1), ("va-34", 0), ("va-34", 1),
                        ("va-36", 0), ("va-36", 1)]:
        cfg = RunConfig(domain="visarith", forced_coverage=True, seeds=(seed,),
                        input_count=10, sample_threshold=100000)
        env = build_env("visarith", bench, seed, cfg)
        scfg = SessionConfig(seed=seed, strategy="worstcase", k=1,
                             sample_threshold=100000)
        sess = Session(env.plugin, env.suite, env.hs, env.inputs, env.examples, scfg,
                       memo=env.memo)
        while True:
            q = sess.next_question()
            if q is None:
                break
            space = list(sess.hs.programs)
            chosen = pruning_power(q, sess.hs, sess.store, sess.engine, space=space)
            best = max(pruning_power(qq, sess.hs, sess.store, sess.engine, space=space)
                       for qq in sess.questions)
            assert chosen == pytest.approx(best) or best == 0.0, (bench, seed, chosen, best)
            rounds_checked += 1
            sess.submit(env.oracle.answer(q, sess.engine.inputs[q.input_id]))
        sessions += 1
    report("selection-optimality", sessions == 10,
           f"{sessions} sessions, argmax score matched on {rounds_checked} rounds")


# ---------------------------------------------------------------------------
# 7. Strategy ordering


def test_criterion_strategy_ordering(convergence_rows):
    wc = [r["rounds"] for r in convergence_rows if r["seed"] in SEEDS_TREND]
    exp = _strategy_rounds("expected")
    rnd = _strategy_rounds("random")
    m_wc, m_exp, m_rnd = (statistics.median(x) for x in (wc, exp, rnd))
    ratio = m_rnd / max(m_wc, 0.5)
    ok = m_wc <= m_exp <= m_rnd and ratio >= 3
    report("strategy-ordering", ok,
           f"median rounds worstcase={m_wc} expected={m_exp} random={m_rnd}, "
           f"ratio {ratio:.1f}x")


# ---------------------------------------------------------------------------
# 8. Ablation trend


def test_criterion_ablation_trend():
    cfg = RunConfig(domain="visarith", forced_coverage=True, seeds=(0,),
                    benchmarks=("va-22", "va-16"), input_count=12,
                    max_list_len=3, ast_bound=11)
    out = run_scaling(cfg, [0.3, 0.1, 0.06, 0.045, 0.03], bench_limit=2,
                      rounds_per_session=2)
    full = [(r["mean_set_size"], r["mean_round_s"]) for r in out["series"]
            if r["pipeline"] == "full"]
    abl = [(r["mean_set_size"], r["mean_round_s"]) for r in out["series"]
           if r["pipeline"] == "ablated"]
    largest = max(range(len(full)), key=lambda i: full[i][0])
    max_size = full[largest][0]
    ratio = abl[largest][1] / max(full[largest][1], 1e-9)
    xs = np.array([f[0] for f in full])
    ys = np.array([f[1] for f in full])
    pred = np.polyval(np.polyfit(xs, ys, 1), xs)
    r2 = 1 - ((ys - pred) ** 2).sum() / max(((ys - ys.mean()) ** 2).sum(), 1e-12)
    ok = max_size >= 3.5 and ratio >= 2 and r2 >= 0.9
    report("ablation-trend", ok,
           f"max mean set size {max_size:.2f}, ablated/full {ratio:.1f}x at largest, "
           f"full-series linear R2={r2:.3f}")


# ---------------------------------------------------------------------------
# 9. Baseline failure demonstration


def test_criterion_baseline_failure():
    failures = 0
    total = 0
    for b in SUITE_IDS:
        for s in SEEDS_TREND:
            cfg = RunConfig(domain="visarith", strategy="standard", seeds=(s,))
            row = run_benchmark("visarith", b, s, cfg)["row"]
            total += 1
            # pruned from the space, or rejected outright by the initial
            # prediction-as-truth consistency filter
            failures += bool(row["gt_pruned"]) or not row["gt_in_initial"]
    frac = failures / total
    report("baseline-failure", frac >= 0.30,
           f"ground truth pruned in {failures}/{total} = {frac:.0%} of standard-semantics runs")


# ---------------------------------------------------------------------------
# 10. Overview walkthrough fixture


def test_criterion_overview_fixture():
    fx = overview_fixture()
    store = fb.FeedbackStore()
    out1 = eval_constrained_ref(fx.programs[0], store, fx.dom_input, fx.plugin, fx.suite)
    out2 = eval_constrained_ref(fx.programs[1], store, fx.dom_input, fx.plugin, fx.suite)
    assert out1 == frozenset([2, 3]) and out2 == frozenset([1, 2])
    cfg = SessionConfig(seed=7, strategy="worstcase", k=1)
    sess = Session(fx.plugin, fx.suite, fx.hs, [fx.dom_input], fx.examples, cfg)
    q1 = next(q for q in sess.questions if q.key == "x2")
    q2 = next(q for q in sess.questions if q.key == "x3")
    p1 = pruning_power(q1, sess.hs, sess.store, sess.engine)
    p2 = pruning_power(q2, sess.hs, sess.store, sess.engine)
    assert p1 == pytest.approx(0.25) and p2 == pytest.approx(0.0)
    first = sess.next_question()
    assert first.key == "x2"
    sess.submit(0)
    assert sess.transcript.rounds[0].hs_after == 3
    survivors = {p.key() for p in
                 __import__("consynth.learning", fromlist=["refine_hs"]).refine_hs(
                     sess.hs, sess.store, sess.engine).programs}
    assert fx.programs[1].key() not in survivors
    report("overview-fixture", True,
           "outputs {2,3}/{1,2}, powers 0.25/0, first question x2, P2 pruned")
