"""Command-line interface: benchmark suites, the scaling sweep, and the
session service."""
from __future__ import annotations

import json
import sys

import click

from .harness import RunConfig, run_scaling, run_suite


def _common_config(domain, bench, strategy, no_absint, no_bce, delta, forced_coverage,
                   k, kprime, seeds, timeout, out, input_count) -> RunConfig:
    benches = tuple(bench.split(",")) if bench and bench != "all" else (("all",) if bench == "all" else ())
    seed_list = tuple(int(s) for s in seeds.split(","))
    return RunConfig(
        domain=domain,
        benchmarks=benches,
        strategy=strategy,
        no_absint=no_absint,
        no_bce=no_bce,
        delta=delta,
        forced_coverage=forced_coverage,
        k=None if k == 0 else k,
        kprime=kprime,
        seeds=seed_list,
        timeout_s=timeout,
        out_dir=out,
        input_count=input_count,
    )


@click.group()
def main():
    """Active learning for neurosymbolic program synthesis."""


@main.command()
@click.option("--domain", type=click.Choice(["visarith", "objextract"]), default="visarith")
@click.option("--bench", default="", help="comma-separated benchmark ids, or 'all' (default: suite set)")
@click.option("--strategy", type=click.Choice(["worstcase", "expected", "random", "standard"]),
              default="worstcase")
@click.option("--no-absint", is_flag=True, help="disable bidirectional abstract interpretation")
@click.option("--no-bce", is_flag=True, help="disable bounded-conformal question bounding")
@click.option("--delta", type=float, default=0.1, help="conformal miscoverage rate")
@click.option("--forced-coverage", is_flag=True, help="union the true label into every prediction set")
@click.option("--k", type=int, default=1, help="BCE cardinality bound (0 = unbounded)")
@click.option("--kprime", type=float, default=1.0, help="BCE proportional bound in (0,1]")
@click.option("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
@click.option("--timeout", type=float, default=600.0, help="per-session timeout (s)")
@click.option("--input-count", type=int, default=None, help="override the input-space size")
@click.option("--out", default=None, help="output directory for metrics and transcripts")
def run(domain, bench, strategy, no_absint, no_bce, delta, forced_coverage, k, kprime,
        seeds, timeout, input_count, out):
    """Run benchmarks and emit metrics (CSV + JSON) and transcripts (JSON)."""
    cfg = _common_config(domain, bench, strategy, no_absint, no_bce, delta,
                         forced_coverage, k, kprime, seeds, timeout, out, input_count)
    result = run_suite(cfg)
    agg = result["aggregate"]
    for row in result["rows"]:
        click.echo(f"{row['bench']} seed={row['seed']} status={row['status']} "
                   f"solved={row['solved']} rounds={row['rounds']} "
                   f"mean_round_s={row['mean_round_s']:.2f}")
    click.echo(json.dumps(agg, indent=1))
    incomplete = [r for r in result["rows"] if r["status"] not in
                  ("converged", "exhausted", "failed", "timeout")]
    sys.exit(0 if not incomplete else 1)


@main.command()
@click.option("--domain", type=click.Choice(["visarith", "objextract"]), default="visarith")
@click.option("--bench", default="", help="comma-separated benchmark ids")
@click.option("--deltas", default="0.3,0.15,0.08,0.04,0.02,0.01", help="delta sweep, high to low")
@click.option("--forced-coverage", is_flag=True)
@click.option("--k", type=int, default=1)
@click.option("--kprime", type=float, default=1.0)
@click.option("--seeds", default="0")
@click.option("--timeout", type=float, default=600.0)
@click.option("--bench-limit", type=int, default=3)
@click.option("--rounds", type=int, default=2, help="rounds measured per session")
@click.option("--out", default=None)
def scaling(domain, bench, deltas, forced_coverage, k, kprime, seeds, timeout,
            bench_limit, rounds, out):
    """Sweep delta and compare the full pipeline against the ablated one."""
    cfg = _common_config(domain, bench, "worstcase", False, False, 0.1, forced_coverage,
                         k, kprime, seeds, timeout, out, None)
    delta_list = [float(d) for d in deltas.split(",")]
    result = run_scaling(cfg, delta_list, bench_limit=bench_limit, rounds_per_session=rounds)
    for row in result["series"]:
        click.echo(f"delta={row['delta']:<6} pipeline={row['pipeline']:<8} "
                   f"set_size={row['mean_set_size']:.2f} round_s={row['mean_round_s']:.3f}")
    sys.exit(0)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8765)
def serve(host, port):
    """Launch the interactive session service (serves the labeler UI if built)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
