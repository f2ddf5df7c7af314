"""Command-line front end: simulation, single CI tests, discovery runs
and multi-seed benchmark sweeps.

Exit codes: 0 success, 2 usage error, 3 numeric failure, 4 I/O error.
The SIGCAUSAL_THREADS environment variable caps the benchmark worker
pool (default 1).
"""

from __future__ import annotations

import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import citest, discovery, graphs, paths, sde, sigkernel

EXIT_NUMERIC = 3
EXIT_IO = 4

FAMILIES = ("linear-drift", "diffusion", "path-dependence", "nonlinear",
            "fbm", "cd-linear", "fda")
ALGORITHMS = ("alg1", "pc-init", "robust", "fci")


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map library failures onto the documented exit codes."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (sde.SimulationDiverged, FloatingPointError,
                np.linalg.LinAlgError, ValueError) as exc:
            _fail(EXIT_NUMERIC, exc)
        except OSError as exc:
            _fail(EXIT_IO, exc)
    wrapper.__name__ = fn.__name__
    return wrapper


def _threads():
    try:
        return max(1, int(os.environ.get("SIGCAUSAL_THREADS", "1")))
    except ValueError:
        return 1


def _truth_for(family, d, edge_prob, loop_prob, rng):
    if family == "linear-drift":
        return graphs.Dag(2, [(0, 1), (0, 0), (1, 1)])
    if family == "diffusion":
        return graphs.Dag(2, [(0, 1), (0, 0), (1, 1)])
    if family == "path-dependence":
        return graphs.Dag(2, [(0, 1)])
    if family == "nonlinear":
        return graphs.Dag(2, [(1, 1)])
    if family == "fbm":
        return graphs.Dag(2, [(0, 1)])
    return graphs.sample_er_dag(d, edge_prob, loop_prob, rng)


def _simulate_family(family, truth, cfg, rng):
    if family == "path-dependence":
        p = sde.sample_params(family, rng)
        return sde.simulate_path_dependent(cfg, rng, **p), p
    if family == "nonlinear":
        spec = sde.sample_params(family, rng)
        return sde.simulate_nonlinear(spec, cfg), spec
    if family == "fbm":
        spec = sde.sample_params(family, rng)
        return sde.simulate_fbm_pair(spec, cfg), spec
    if family == "fda":
        spec = sde.FdaSpec(m_basis=6, a=1.0, noise_sd=0.1)
        return sde.generate_fda_sample(truth, spec, cfg), spec
    if family == "cd-linear":
        spec = sde.sample_params(family, rng, g=truth)
        return sde.simulate_linear(spec, cfg), spec
    spec = sde.sample_params(family, rng)
    return sde.simulate_linear(spec, cfg), spec


def _spec_to_json(spec):
    if isinstance(spec, dict):
        return spec
    out = {}
    for name, value in vars(spec).items():
        out[name] = value.tolist() if isinstance(value, np.ndarray) else value
    return out


@click.group()
def main():
    """Signature-kernel causal discovery toolkit."""


@main.command()
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--d", "d", type=int, default=2, show_default=True)
@click.option("--n-paths", type=int, default=200, show_default=True)
@click.option("--n-steps", type=int, default=128, show_default=True)
@click.option("--horizon", type=float, default=1.0, show_default=True)
@click.option("--edge-prob", type=float, default=0.3, show_default=True)
@click.option("--loop-prob", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guard
def simulate(family, d, n_paths, n_steps, horizon, edge_prob, loop_prob,
             seed, out):
    """Simulate a family draw and write sample, truth graph and spec."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 977]))
    cfg = sde.SimConfig(n_paths=n_paths, n_steps=n_steps, horizon=horizon,
                        seed=seed)
    truth = _truth_for(family, d, edge_prob, loop_prob, rng)
    sample, spec = _simulate_family(family, truth, cfg, rng)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "sample.jsonl"), "w") as fp:
        paths.write_jsonl(sample, fp)
    with open(os.path.join(out, "truth.json"), "w") as fp:
        fp.write(truth.to_json())
    with open(os.path.join(out, "spec.json"), "w") as fp:
        json.dump({"family": family, "params": _spec_to_json(spec)}, fp,
                  indent=2)
    click.echo(f"wrote {out}/sample.jsonl ({len(sample)} paths)")


def _load_sample(path):
    try:
        with open(path) as fp:
            if path.endswith(".csv"):
                return paths.read_csv_long(fp)
            return paths.read_jsonl(fp)
    except OSError as exc:
        _fail(EXIT_IO, exc)


def _kernel_cfg(lifting, bandwidth, refinement):
    return sigkernel.KernelConfig(lifting=lifting, bandwidth=bandwidth,
                                  refinement=refinement)


@main.command("test-ci")
@click.option("--sample", "sample_file", type=click.Path(), required=True)
@click.option("--relation", type=click.Choice(["sym", "future", "self", "init"]),
              required=True)
@click.option("--i", "var_i", type=int, required=True)
@click.option("--j", "var_j", type=int, required=True)
@click.option("--k", "cond", type=int, multiple=True)
@click.option("--s", type=float, default=0.1, show_default=True)
@click.option("--h", type=float, default=0.9, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--n-null", type=int, default=1000, show_default=True)
@click.option("--refinement", type=int, default=0, show_default=True)
@click.option("--lifting", type=click.Choice(["rbf", "euclidean"]),
              default="rbf", show_default=True)
@click.option("--bandwidth", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dump-grams", type=click.Path(), default=None,
              help="Directory for CSV dumps of the Gram matrices used.")
@click.option("--out", type=click.Path(), default=None)
@_guard
def test_ci(sample_file, relation, var_i, var_j, cond, s, h, alpha, n_null,
            refinement, lifting, bandwidth, seed, dump_grams, out):
    """Run one CI query against a path sample and emit a result JSON."""
    cond = tuple(sorted(cond))
    if var_i in cond or var_j in cond or (var_i == var_j and relation != "self"):
        _fail(2, "query variables must be disjoint")
    sample = _load_sample(sample_file)
    bk = discovery.StatisticalBackend(
        sample,
        kernel_cfg=_kernel_cfg(lifting, bandwidth, refinement),
        test_cfg=citest.TestConfig(alpha=alpha, n_null=n_null, seed=seed),
        s=s, h=h)
    if relation == "sym":
        bk.sym(var_i, var_j, cond)
    elif relation == "future":
        bk.future_extended(var_i, var_j, cond)
    elif relation == "self":
        bk.self_loop(var_i, cond)
    else:
        bk.initial_value(var_i, var_j)
    query, independent, p_value = bk.log[-1]
    result = {
        "relation": query.relation,
        "i": query.i, "j": query.j, "K": list(query.K),
        "independent": bool(independent),
        "p_value": float(p_value),
        "alpha": alpha,
    }
    if dump_grams:
        os.makedirs(dump_grams, exist_ok=True)
        for key, mat in bk._grams.items():
            name = "_".join(str(p) for p in key)
            np.savetxt(os.path.join(dump_grams, f"gram_{name}.csv"), mat,
                       delimiter=",")
    text = json.dumps(result, indent=2)
    if out:
        with open(out, "w") as fp:
            fp.write(text)
    click.echo(text)


def _run_algorithm(algorithm, bk, d, cfg, observed=None):
    if algorithm == "alg1":
        return discovery.run_algorithm1(bk, d, cfg)
    if algorithm == "pc-init":
        return discovery.run_pc_with_init_postprocessing(bk, d, cfg)
    if algorithm == "robust":
        return discovery.run_robust_no_init(bk, d, cfg)
    return discovery.run_partially_observed(bk, observed, cfg)


@main.command()
@click.option("--sample", "sample_file", type=click.Path(), default=None)
@click.option("--truth", "truth_file", type=click.Path(), default=None,
              help="Ground-truth graph JSON; switches to oracle mode.")
@click.option("--algorithm", type=click.Choice(ALGORITHMS), required=True)
@click.option("--observed", type=int, multiple=True,
              help="Observed variables for the fci algorithm.")
@click.option("--s", type=float, default=0.1, show_default=True)
@click.option("--h", type=float, default=0.9, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--max-cond-size", type=int, default=None)
@click.option("--refinement", type=int, default=0, show_default=True)
@click.option("--lifting", type=click.Choice(["rbf", "euclidean"]),
              default="rbf", show_default=True)
@click.option("--bandwidth", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--query-log", type=click.Path(), default=None)
@_guard
def discover(sample_file, truth_file, algorithm, observed, s, h, alpha,
             max_cond_size, refinement, lifting, bandwidth, seed, out,
             query_log):
    """Run a discovery algorithm on data or on a ground-truth oracle."""
    if (sample_file is None) == (truth_file is None):
        _fail(2, "provide exactly one of --sample or --truth")
    cfg = discovery.DiscoveryConfig(s=s, h=h, alpha=alpha,
                                    max_cond_size=max_cond_size, seed=seed)
    if truth_file:
        try:
            with open(truth_file) as fp:
                truth = graphs.Dag.from_json(fp.read())
        except OSError as exc:
            _fail(EXIT_IO, exc)
        bk = discovery.OracleBackend(truth)
        d = truth.d
    else:
        sample = _load_sample(sample_file)
        bk = discovery.StatisticalBackend(
            sample,
            kernel_cfg=_kernel_cfg(lifting, bandwidth, refinement),
            test_cfg=citest.TestConfig(alpha=alpha, seed=seed),
            s=s, h=h)
        d = bk.d
    if algorithm == "fci":
        obs = sorted(observed) if observed else list(range(d))
        result = _run_algorithm(algorithm, bk, d, cfg, observed=obs)
    else:
        result = _run_algorithm(algorithm, bk, d, cfg)
    with open(out, "w") as fp:
        fp.write(result.to_json())
    if query_log:
        with open(query_log, "w") as fp:
            for query, answer, p_value in bk.log:
                fp.write(json.dumps({
                    "relation": query.relation, "i": query.i, "j": query.j,
                    "K": list(query.K), "independent": bool(answer),
                    "p_value": float(p_value)}) + "\n")
    click.echo(f"wrote {out} ({bk.query_count()} CI queries)")


def _benchmark_row(family, d, algorithm, seed, n_paths, n_steps, edge_prob,
                   loop_prob, refinement):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 977]))
    cfg = sde.SimConfig(n_paths=n_paths, n_steps=n_steps, seed=seed)
    truth = _truth_for(family, d, edge_prob, loop_prob, rng)
    sample, _ = _simulate_family(family, truth, cfg, rng)
    bk = discovery.StatisticalBackend(
        sample,
        kernel_cfg=sigkernel.KernelConfig(refinement=refinement),
        test_cfg=citest.TestConfig(seed=seed))
    dcfg = discovery.DiscoveryConfig(seed=seed)
    start = time.perf_counter()
    estimate = _run_algorithm(algorithm, bk, truth.d, dcfg,
                              observed=list(range(truth.d)))
    elapsed = time.perf_counter() - start
    row_shd = graphs.shd(truth, estimate) if isinstance(estimate, graphs.Dag) else None
    return {
        "seed": seed, "family": family, "d": truth.d, "algorithm": algorithm,
        "shd": row_shd,
        "nshd": graphs.nshd(truth, estimate) if row_shd is not None else None,
        "queries": bk.query_count(), "wall_time": elapsed,
        "graph": estimate.to_json(),
    }


@main.command()
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--d", "d", type=int, default=2, show_default=True)
@click.option("--algorithm", type=click.Choice(ALGORITHMS), required=True)
@click.option("--seeds", type=str, default="0:10", show_default=True,
              help="Seed range lo:hi (half-open).")
@click.option("--n-paths", type=int, default=200, show_default=True)
@click.option("--n-steps", type=int, default=64, show_default=True)
@click.option("--edge-prob", type=float, default=0.3, show_default=True)
@click.option("--loop-prob", type=float, default=0.5, show_default=True)
@click.option("--refinement", type=int, default=0, show_default=True)
@click.option("--times-100/--raw", default=True, show_default=True,
              help="Report SHD scaled by 100 in the aggregate.")
@click.option("--out", type=click.Path(), required=True)
@_guard
def benchmark(family, d, algorithm, seeds, n_paths, n_steps, edge_prob,
              loop_prob, refinement, times_100, out):
    """Sweep seeds for one family and algorithm, reporting SHD."""
    try:
        lo, hi = (int(p) for p in seeds.split(":"))
    except ValueError:
        _fail(2, f"bad seed range {seeds!r}")
    if hi <= lo:
        _fail(2, "empty seed range")
    os.makedirs(out, exist_ok=True)
    rows = []

    def worker(seed):
        try:
            return _benchmark_row(family, d, algorithm, seed, n_paths,
                                  n_steps, edge_prob, loop_prob, refinement)
        except Exception as exc:
            return {"seed": seed, "family": family, "d": d,
                    "algorithm": algorithm, "error": str(exc)}

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for row in pool.map(worker, range(lo, hi)):
            rows.append(row)
    fields = ["seed", "family", "d", "algorithm", "shd", "nshd", "queries",
              "wall_time", "graph", "error"]
    with open(os.path.join(out, "rows.csv"), "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({f: row.get(f, "") for f in fields})
    shds = np.array([r["shd"] for r in rows if r.get("shd") is not None],
                    dtype=float)
    scale = 100.0 if times_100 else 1.0
    aggregate = {
        "family": family, "algorithm": algorithm, "n_rows": len(rows),
        "n_failed": sum(1 for r in rows if "error" in r),
        "shd_scale": scale,
        "shd_mean": float(shds.mean() * scale) if len(shds) else None,
        "shd_stderr": (float(shds.std(ddof=1) / np.sqrt(len(shds)) * scale)
                       if len(shds) > 1 else None),
    }
    with open(os.path.join(out, "aggregate.json"), "w") as fp:
        json.dump(aggregate, fp, indent=2)
    click.echo(json.dumps(aggregate, indent=2))


if __name__ == "__main__":
    main()
