"""Benchmark runner: simulated oracle, per-benchmark environments, suite and
scaling runs, metrics output."""
from __future__ import annotations

import csv
import json
import math
import statistics
import time
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

from . import objextract as ox
from . import visarith as va
from .conformal import PredictorSuite, suite_from_config
from .dsl import Program, eval_ground_truth, from_sexpr
from .learning import HypothesisSpace, Session, SessionConfig
from .values import PerceptRef


@dataclass
class RunConfig:
    domain: str = "visarith"
    benchmarks: tuple = ()            # ids; empty = suite defaults
    strategy: str = "worstcase"       # worstcase | expected | random | standard
    no_absint: bool = False
    no_bce: bool = False
    delta: float = 0.1
    forced_coverage: bool = False
    k: Optional[int] = 1
    kprime: float = 1.0
    seeds: tuple = (0, 1, 2, 3, 4)
    timeout_s: float = 600.0
    input_count: Optional[int] = None
    max_list_len: int = 4
    ast_bound: int = 12
    initial_examples: int = 2
    distinguish_depth: int = 1
    sample_threshold: int = 50
    max_rounds: Optional[int] = None
    error_rate: Optional[float] = None
    out_dir: Optional[str] = None


class SimulatedOracle:
    """Emulates the user: ground-truth program for IO questions, hidden labels
    for perception questions."""

    def __init__(self, plugin, gt: Program, token_index: dict):
        self.plugin = plugin
        self.gt = gt
        self.token_index = token_index

    def label(self, fn: str, tok: PerceptRef):
        return self.token_index[tok.token].hidden_truth

    def answer(self, q, dom_input):
        if q.is_io:
            return eval_ground_truth(self.gt, dom_input, self.plugin, self)
        return self.token_index[q.key].hidden_truth


@dataclass
class BenchmarkEnv:
    bench: dict
    plugin: object
    suite: PredictorSuite
    inputs: list
    gt: Program
    oracle: SimulatedOracle
    examples: list
    hs: HypothesisSpace
    memo: dict = field(default_factory=dict)


def _conformal_config(domain: str, delta: float, seed: int, error_rate: Optional[float]) -> dict:
    from importlib import resources

    name = f"conformal_{domain}.json"
    with resources.files("consynth.data").joinpath(name).open() as f:
        cfg = json.load(f)
    cfg["delta"] = delta
    cfg["seed"] = seed
    if error_rate is not None:
        for mc in cfg["models"].values():
            key = "error_rate" if mc["kind"] == "digit" else "flip_rate"
            mc[key] = error_rate
    return cfg


def catalog(domain: str) -> list[dict]:
    return va.load_catalog() if domain == "visarith" else ox.load_catalog()


def benchmark_ids(domain: str, requested=()) -> list[str]:
    entries = catalog(domain)
    if requested and list(requested) != ["all"]:
        return list(requested)
    if requested == () or requested is None:
        return [e["id"] for e in entries if e.get("suite_default", True)]
    return [e["id"] for e in entries]


def build_env(domain: str, bench_id: str, seed: int, cfg: RunConfig) -> BenchmarkEnv:
    entries = {e["id"]: e for e in catalog(domain)}
    bench = entries[bench_id]
    gt = from_sexpr(bench["program"])
    conf = _conformal_config(domain, cfg.delta, seed, cfg.error_rate)
    suite = suite_from_config(conf)

    if domain == "visarith":
        plugin = va.VisArithPlugin()
        space = dict(bench["input_space"])
        if cfg.input_count is not None:
            space["count"] = cfg.input_count
        space["max_len"] = min(space.get("max_len", 4), cfg.max_list_len)
        inputs = va.generate_inputs(seed=seed * 1009 + zlib.crc32(bench_id.encode()) % 997,
                                    prefix=f"{bench_id}-s{seed}-", **space)
        va.register_inputs(inputs, suite)
    else:
        plugin = ox.ObjExtractPlugin(tuple(bench["vocab"]))
        space = dict(bench["input_space"])
        if cfg.input_count is not None:
            space["count"] = cfg.input_count
        inputs = ox.synth_scene_generator(seed=seed * 1013 + zlib.crc32(bench_id.encode()) % 997,
                                          vocab=tuple(bench["vocab"]),
                                          prefix=f"{bench_id}-s{seed}-", **space)
        ox.register_scenes(inputs, suite, plugin)

    oracle = SimulatedOracle(plugin, gt, suite.token_index)
    if cfg.forced_coverage:
        suite.forced_coverage = True

    import random as _random

    rng = _random.Random(seed * 7919 + 13)
    chosen = rng.sample(range(len(inputs)), min(cfg.initial_examples, len(inputs)))
    examples = [(inputs[i], eval_ground_truth(gt, inputs[i], plugin, oracle)) for i in chosen]

    memo: dict = {}
    hs = build_hypothesis_space(domain, plugin, suite, inputs, examples, cfg, bench, memo)
    return BenchmarkEnv(bench, plugin, suite, inputs, gt, oracle, examples, hs, memo)


def build_hypothesis_space(domain, plugin, suite, inputs, examples, cfg: RunConfig,
                           bench: dict, memo: Optional[dict] = None) -> HypothesisSpace:
    """Enumerate the grammar up to the AST bound and keep the programs
    consistent with the initial examples under the conformal semantics."""
    from . import feedback as fb
    from .learning import Engine

    if domain == "visarith":
        grammar = va.GrammarConfig()
        raw = plugin.enumerate_programs(grammar, cfg.ast_bound)
    else:
        grammar = ox.ObjxGrammarConfig(attrs=tuple(bench["vocab"])[:4])
        raw = plugin.enumerate_programs(grammar, max(cfg.ast_bound, bench["size"]))
        raw = _wrap_for_mode(raw, bench)
    gt = from_sexpr(bench["program"])
    if gt.key() not in {p.key() for p in raw}:
        raw.append(gt)

    store = fb.FeedbackStore()
    for dom_input, output in examples:
        store = store.with_example(plugin.input_id(dom_input), dom_input, output)
    # hypothesis-space construction is setup infrastructure, not user
    # interaction time: it always uses the full evaluation pipeline
    engine = Engine(plugin, suite, SessionConfig(
        strategy="worstcase" if cfg.strategy != "standard" else "standard",
        use_absint=True), inputs, memo=memo)
    kept = [p for p in raw if engine.consistent(p, store)]
    if not kept:
        from .learning import EmptySpace

        raise EmptySpace(f"no program consistent with the initial examples for {bench['id']}")
    return HypothesisSpace(kept, provenance={"enumerated": len(raw), "bench": bench["id"]})


def _wrap_for_mode(programs: list, bench: dict) -> list:
    if bench.get("mode") == "search":
        from .dsl import SymApp
        from .objextract import objx_program

        wrapped = []
        for p in programs:
            stmt = p.body
            # body is Seq(Let y, expr); rewrap expr under nonempty
            expr = stmt.rest
            wrapped.append(ox.objx_program(SymApp("nonempty", (expr,))))
        return wrapped
    return programs


def run_benchmark(domain: str, bench_id: str, seed: int, cfg: RunConfig) -> dict:
    from .learning import EmptySpace

    t0 = time.monotonic()
    try:
        env = build_env(domain, bench_id, seed, cfg)
    except EmptySpace:
        row = {"domain": domain, "bench": bench_id, "seed": seed, "strategy": cfg.strategy,
               "no_absint": cfg.no_absint, "no_bce": cfg.no_bce, "status": "empty_space",
               "solved": False, "rounds": 0, "mean_round_s": 0.0, "refine_s": 0.0,
               "distinguish_s": 0.0, "select_s": 0.0, "initial_hs": 0, "final_hs": 0,
               "gt_in_initial": False, "gt_pruned": True,
               "setup_s": time.monotonic() - t0, "total_s": time.monotonic() - t0}
        return {"row": row, "transcript": {"status": "empty_space", "rounds": [],
                                           "program": None, "survivors": [],
                                           "meta": {"benchmark": bench_id, "seed": seed}}}
    setup_s = time.monotonic() - t0
    session_cfg = SessionConfig(
        seed=seed,
        strategy=cfg.strategy if cfg.strategy != "standard" else "standard",
        k=cfg.k,
        kprime=cfg.kprime,
        distinguish_depth=cfg.distinguish_depth,
        sample_threshold=cfg.sample_threshold,
        use_absint=not cfg.no_absint,
        use_bce=not cfg.no_bce,
        timeout_s=cfg.timeout_s,
        max_rounds=cfg.max_rounds,
    )
    session = Session(env.plugin, env.suite, env.hs, env.inputs, env.examples, session_cfg,
                      memo=env.memo)
    gt_in_initial = env.gt.key() in {p.key() for p in env.hs.programs}
    transcript = session.run(env.oracle)
    total_s = time.monotonic() - t0

    solved = False
    returned = session.returned_program
    if returned is not None and transcript.status in ("converged", "exhausted"):
        solved = all(
            eval_ground_truth(returned, i, env.plugin, env.oracle)
            == eval_ground_truth(env.gt, i, env.plugin, env.oracle)
            for i in env.inputs
        )
    rounds = transcript.meta.get("rounds", 0)
    times = [r.total_s for r in transcript.rounds]
    phases = {
        "refine_s": sum(r.refine_s for r in transcript.rounds),
        "distinguish_s": sum(r.distinguish_s for r in transcript.rounds),
        "select_s": sum(r.select_s for r in transcript.rounds),
    }
    row = {
        "domain": domain,
        "bench": bench_id,
        "seed": seed,
        "strategy": cfg.strategy,
        "no_absint": cfg.no_absint,
        "no_bce": cfg.no_bce,
        "status": transcript.status,
        "solved": solved,
        "rounds": rounds,
        "mean_round_s": statistics.mean(times) if times else 0.0,
        "refine_s": phases["refine_s"],
        "distinguish_s": phases["distinguish_s"],
        "select_s": phases["select_s"],
        "initial_hs": len(env.hs),
        "final_hs": len(transcript.survivors),
        "gt_in_initial": gt_in_initial,
        "gt_pruned": gt_in_initial and env.gt.key() not in set(transcript.survivors),
        "setup_s": setup_s,
        "total_s": total_s,
    }
    transcript.meta.update({"benchmark": bench_id, "seed": seed, "domain": domain,
                            "strategy": cfg.strategy, "solved": solved})
    return {"row": row, "transcript": transcript.to_dict()}


def run_suite(cfg: RunConfig) -> dict:
    """Per-benchmark and aggregate metrics for every (benchmark, seed)."""
    ids = benchmark_ids(cfg.domain, cfg.benchmarks)
    rows, transcripts = [], []
    for bench_id in ids:
        for seed in cfg.seeds:
            result = run_benchmark(cfg.domain, bench_id, seed, cfg)
            rows.append(result["row"])
            transcripts.append(result["transcript"])
    agg = aggregate(rows)
    out = {"rows": rows, "aggregate": agg, "transcripts": transcripts}
    if cfg.out_dir:
        write_outputs(out, cfg)
    return out


def aggregate(rows: list[dict]) -> dict:
    solved = [r for r in rows if r["solved"]]
    rounds = [r["rounds"] for r in rows]
    return {
        "runs": len(rows),
        "solved": len(solved),
        "solved_frac": len(solved) / len(rows) if rows else 0.0,
        "mean_rounds": statistics.mean(rounds) if rounds else 0.0,
        "median_rounds": statistics.median(rounds) if rounds else 0.0,
        "mean_round_s": statistics.mean([r["mean_round_s"] for r in rows if r["rounds"]] or [0.0]),
        "gt_pruned_runs": sum(1 for r in rows if r["gt_pruned"]),
    }


def write_outputs(out: dict, cfg: RunConfig):
    d = Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    rows = out["rows"]
    with open(d / "metrics.json", "w") as f:
        json.dump({"rows": rows, "aggregate": out["aggregate"]}, f, indent=1)
    if rows:
        with open(d / "metrics.csv", "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            w.writeheader()
            w.writerows(rows)
    with open(d / "transcripts.json", "w") as f:
        json.dump(out["transcripts"], f, indent=1)


# ---------------------------------------------------------------------------
# scaling sweep


def mean_prediction_set_size(env: BenchmarkEnv) -> float:
    sizes = []
    for dom_input in env.inputs:
        for fn, token in env.plugin.atomic_questions(dom_input):
            sizes.append(len(env.suite.predict_set(fn, PerceptRef(token)).labels))
    return statistics.mean(sizes)


def run_scaling(cfg: RunConfig, deltas: list[float], bench_limit: int = 3,
                rounds_per_session: int = 2) -> dict:
    """Sweep delta downward; record mean prediction-set size and mean time per
    round for the full pipeline vs the no-absint + no-bce ablation."""
    ids = benchmark_ids(cfg.domain, cfg.benchmarks)[:bench_limit]
    series = []
    for delta in deltas:
        for ablated in (False, True):
            times, sizes = [], []
            timed_out = False
            for bench_id in ids:
                for seed in cfg.seeds[:1]:
                    sub = RunConfig(**{**asdict(cfg), "delta": delta,
                                       "no_absint": ablated, "no_bce": ablated,
                                       "benchmarks": (bench_id,),
                                       "max_rounds": rounds_per_session,
                                       "out_dir": None})
                    env = build_env(cfg.domain, bench_id, seed, sub)
                    sizes.append(mean_prediction_set_size(env))
                    session_cfg = SessionConfig(
                        seed=seed, strategy="worstcase", k=cfg.k, kprime=cfg.kprime,
                        use_absint=not ablated, use_bce=not ablated,
                        timeout_s=cfg.timeout_s, max_rounds=rounds_per_session,
                        sample_threshold=cfg.sample_threshold)
                    session = Session(env.plugin, env.suite, env.hs, env.inputs,
                                      env.examples, session_cfg, memo=env.memo)
                    tr = session.run(env.oracle)
                    if tr.status == "timeout":
                        timed_out = True
                    times.extend(r.total_s for r in tr.rounds)
            series.append({
                "delta": delta,
                "pipeline": "ablated" if ablated else "full",
                "mean_set_size": statistics.mean(sizes) if sizes else 0.0,
                "mean_round_s": statistics.mean(times) if times else 0.0,
                "rounds_measured": len(times),
                "timeout": timed_out,
            })
    out = {"series": series}
    if cfg.out_dir:
        d = Path(cfg.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "scaling.json", "w") as f:
            json.dump(out, f, indent=1)
        with open(d / "scaling.csv", "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(series[0].keys()))
            w.writeheader()
            w.writerows(series)
    return out
