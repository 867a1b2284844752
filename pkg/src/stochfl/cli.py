"""Command-line entry point: ``stochfl <command> [flags]``.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
Failures print one JSON object ``{"error": code, "message": ...}`` on
stderr and exit nonzero (2 usage, 3 bad input, 4 solver failure, 5 golden
mismatch).
"""

from __future__ import annotations

import csv
import io
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib.metadata import version as dist_version
from pathlib import Path

import click
import numpy as np

from . import __version__
from .approx import approx_multistage, approx_two_stage
from .bounds import BoundsError, compute_report, reports_to_csv
from .evaluation import (AXES, METRICS, ROLLING_COLUMNS, Policy, RollingConfig, SweepConfig, rolling_horizon,
                         sweep)
from .golden import EX1_LAMBDAS, EX2_LAMBDAS, EX2_VMS, example_one, example_one_values, example_two
from .instance import GridConfig, Instance, InstanceError, generate_grid_instance, load_instance, save_instance, toy_instance
from .lp_core import SOLVERS
from .models import FormulationKind, ModelError, build, build_deterministic, build_dro_two_stage, extract_solution
from .scenario_tree import ScenarioTree, TreeError, TreeKind, TreeMode, build_tree

EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER, EXIT_GOLDEN = 2, 3, 4, 5
GOLDEN_TOL = 1e-6

MODEL_ALIASES = {
    "det": "det", "deterministic": "det",
    "ts": "ts", "two-stage": "ts", "twostage": "ts",
    "ms": "ms", "multistage": "ms", "multi-stage": "ms",
    "ts-prior": "ts-prior", "two-stage-prior": "ts-prior",
    "ms-prior": "ms-prior", "multistage-prior": "ms-prior",
    "dro": "dro",
}


class CliError(Exception):
    def __init__(self, code: str, message: str, exit_code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code
        self.exit_code = exit_code


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seeds: list[int] = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    wall_time: float = 0.0
    outputs: list[str] = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=1, sort_keys=True, default=str) + "\n")


def versions() -> dict:
    return {"stochfl": __version__, "python": platform.python_version(),
            **{name: dist_version(name) for name in ("numpy", "scipy", "click")}}


class Run:
    """Collects outputs for one command and writes the manifest at the end."""

    def __init__(self, ctx: click.Context, out: str, config: dict, seeds=()):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.start = time.perf_counter()
        argv = (ctx.find_root().obj or {}).get("argv")
        argv = list(sys.argv[1:] if argv is None else argv)
        self.manifest = RunManifest(ctx.command_path, argv, config, [int(s) for s in seeds], versions())

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text)
        self.manifest.outputs.append(str(path))
        return path

    def finish(self) -> None:
        self.manifest.wall_time = time.perf_counter() - self.start
        self.manifest.outputs.append(str(self.dir / "manifest.json"))
        self.manifest.write(self.dir / "manifest.json")


# ---------------------------------------------------------------------------
# input handling
# ---------------------------------------------------------------------------

def canonical_model(name: str) -> str:
    key = name.strip().lower()
    if key not in MODEL_ALIASES:
        raise CliError("unknown_model", f"unknown model {name!r}; choose from det, ts, ms, ts-prior, ms-prior, dro")
    return MODEL_ALIASES[key]


def formulation(model: str, transformed: bool) -> FormulationKind:
    if model == "ts":
        return FormulationKind("ts" if transformed else "ts-original")
    if model == "ts-prior":
        return FormulationKind("ts-prior" if transformed else "ts-prior-original")
    return FormulationKind(model)


def _load_instance(path: str) -> Instance:
    if not Path(path).is_file():
        raise CliError("missing_file", f"instance file not found: {path}")
    try:
        return load_instance(path)
    except InstanceError as exc:
        raise CliError("bad_instance", f"{path}: {exc}") from None


def _load_tree(path: str) -> ScenarioTree:
    if not Path(path).is_file():
        raise CliError("missing_file", f"tree file not found: {path}")
    try:
        return ScenarioTree.load(path)
    except (TreeError, KeyError, ValueError, TypeError) as exc:
        raise CliError("bad_tree", f"{path}: {exc}") from None


def check_pair(model: str, inst: Instance, tree: ScenarioTree) -> None:
    """Reject model/tree/instance combinations before anything is solved."""
    if tree.num_customers != inst.N:
        raise CliError("mode_mismatch", f"tree has {tree.num_customers} customers, instance has {inst.N}")
    if tree.last_stage != inst.T:
        raise CliError("mode_mismatch", f"tree ends at stage {tree.last_stage}, instance has T={inst.T}")
    prioritized = model in ("ts-prior", "ms-prior")
    budget = tree.mode is TreeMode.DEMAND_AND_BUDGET
    if prioritized and not budget:
        raise CliError("mode_mismatch", f"{model} needs a budget-mode tree (generate with --budget)")
    if prioritized and not inst.equal_cost_sites():
        raise CliError("mode_mismatch", f"{model} needs equal site costs and capacities within each stage")
    if not prioritized and budget:
        raise CliError("mode_mismatch", f"{model} needs a demand-only tree, got a budget-mode tree")


def stage_demands(tree: ScenarioTree) -> np.ndarray:
    """Probability-weighted mean demand per stage (T x N)."""
    rows = []
    for t in tree.stages:
        if t == 0:
            continue
        nodes = tree.stage_nodes(t)
        rows.append(sum(tree.p(n) * tree.demand(n) for n in nodes) / sum(tree.p(n) for n in nodes))
    return np.array(rows)


def scenario_samples(tree: ScenarioTree) -> np.ndarray:
    """One T x N demand sample per leaf, equiprobable trees only."""
    leaves = tree.leaves()
    if not np.allclose([tree.p(n) for n in leaves], 1.0 / len(leaves)):
        raise CliError("bad_tree", "dro samples need equiprobable scenarios")
    return np.array([[tree.demand(m) for m in tree.path(n) if tree.stage(m) > 0] for n in leaves])


def generated(seed: int, stages: int, facilities: int, customers: int, branches: int, kind: str, sigma: float,
              lam: float, alpha: float, budget: bool, toy: bool) -> tuple[Instance, ScenarioTree]:
    try:
        cfg = GridConfig(sigma=sigma, lam=lam, alpha=alpha)
        if toy:
            inst = toy_instance(seed, stages, cfg)
        else:
            inst = generate_grid_instance(seed, stages, facilities, customers, cfg)
        mode = TreeMode.DEMAND_AND_BUDGET if budget else TreeMode.DEMAND_ONLY
        return inst, build_tree(kind, inst, branches, seed, mode)
    except (InstanceError, TreeError) as exc:
        raise CliError("bad_config", str(exc)) from None


def solver_options(solver: str, time_limit: float) -> dict:
    return {"time_limit": time_limit} if time_limit > 0 else {}


def fail(exc: CliError) -> None:
    click.echo(json.dumps({"error": exc.code, "message": str(exc)}, sort_keys=True), err=True)
    sys.exit(exc.exit_code)


# ---------------------------------------------------------------------------
# shared flags
# ---------------------------------------------------------------------------

def common(f):
    f = click.option("--out", default="out", show_default=True, help="Output directory.")(f)
    f = click.option("--threads", default=1, show_default=True, type=click.IntRange(min=1),
                     help="Worker cap (all solves here are single-threaded).")(f)
    f = click.option("--time-limit", default=3600.0, show_default=True, type=click.FloatRange(min=0),
                     help="Per-solve limit in seconds; 0 disables.")(f)
    f = click.option("--solver", type=click.Choice(sorted(SOLVERS)), default="highs", show_default=True)(f)
    return f


def generation(f):
    f = click.option("--seed", default=0, show_default=True, type=int)(f)
    f = click.option("--stages", default=3, show_default=True, type=click.IntRange(min=1))(f)
    f = click.option("--facilities", default=6, show_default=True, type=click.IntRange(min=1))(f)
    f = click.option("--customers", default=10, show_default=True, type=click.IntRange(min=1))(f)
    f = click.option("--branches", default=2, show_default=True, type=click.IntRange(min=1))(f)
    f = click.option("--tree-kind", type=click.Choice([k.value for k in TreeKind]), default="sd",
                     show_default=True)(f)
    f = click.option("--sigma", default=0.8, show_default=True, type=click.FloatRange(min=0))(f)
    f = click.option("--lambda", "lam", default=0.5, show_default=True, type=click.FloatRange(0, 1))(f)
    f = click.option("--alpha", default=0.95, show_default=True, type=click.FloatRange(0, 1, max_open=True))(f)
    f = click.option("--toy", is_flag=True, help="Use the fixed six-site, ten-customer layout.")(f)
    return f


def source(f):
    f = click.option("--instance", "instance_path", default=None, help="Instance JSON (else generated).")(f)
    f = click.option("--tree", "tree_path", default=None, help="Tree JSON (else generated).")(f)
    return generation(f)


def resolve(instance_path, tree_path, budget: bool, **gen) -> tuple[Instance, ScenarioTree]:
    if (instance_path is None) != (tree_path is None):
        raise CliError("bad_flags", "--instance and --tree must be given together")
    if instance_path is None:
        return generated(budget=budget, **gen)
    return _load_instance(instance_path), _load_tree(tree_path)


def gen_args(kw: dict) -> dict:
    keys = ("seed", "stages", "facilities", "customers", "branches", "tree_kind", "sigma", "lam", "alpha", "toy")
    out = {k: kw[k] for k in keys}
    out["kind"] = out.pop("tree_kind")
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(__version__, prog_name="stochfl")
def cli():
    """Risk-averse stochastic facility location: models, bounds, heuristics and evaluation."""


@cli.command()
@generation
@click.option("--budget", is_flag=True, help="Budget-mode tree with a stage-0 root (prioritized models).")
@click.option("--out", default="out", show_default=True)
@click.pass_context
def generate(ctx, budget, out, **kw):
    """Write instance.json and tree.json."""
    inst, tree = generated(budget=budget, **gen_args(kw))
    run = Run(ctx, out, dict(kw, budget=budget), [kw["seed"]])
    save_instance(inst, run.dir / "instance.json")
    tree.save(run.dir / "tree.json")
    run.manifest.outputs += [str(run.dir / "instance.json"), str(run.dir / "tree.json")]
    run.finish()
    click.echo(f"wrote {run.dir / 'instance.json'} and {run.dir / 'tree.json'} ({len(tree)} nodes)")


@cli.command()
@click.option("--model", "model_name", required=True, help="det, ts, ms, ts-prior, ms-prior or dro.")
@click.option("--transformed/--original", default=True, show_default=True,
              help="Two-stage models: transformed (stage-tied) or original form.")
@click.option("--cuts", type=click.Choice(["on", "off"]), default="off", show_default=True)
@click.option("--epsilon", default=0.0, show_default=True, type=click.FloatRange(min=0), help="DRO radius.")
@click.option("--budget", is_flag=True, help="Generate a budget-mode tree (prioritized models).")
@source
@common
@click.pass_context
def solve(ctx, model_name, transformed, cuts, epsilon, budget, instance_path, tree_path, out, threads, time_limit,
          solver, **kw):
    """Solve one formulation and write solution.json."""
    model = canonical_model(model_name)
    prioritized = model in ("ts-prior", "ms-prior")
    inst, tree = resolve(instance_path, tree_path, budget or prioritized, **gen_args(kw))
    if model not in ("det", "dro"):
        check_pair(model, inst, tree)
    elif tree.mode is TreeMode.DEMAND_AND_BUDGET:
        raise CliError("mode_mismatch", f"{model} needs a demand-only tree")
    if cuts == "on" and not prioritized:
        raise CliError("bad_flags", "--cuts on applies to prioritized models only")
    config = dict(kw, model=model, transformed=transformed, cuts=cuts, epsilon=epsilon, instance=instance_path,
                  tree=tree_path, solver=solver, time_limit=time_limit, threads=threads)
    run = Run(ctx, out, config, [kw["seed"]])
    try:
        if model == "det":
            m = build_deterministic(inst, stage_demands(tree))
        elif model == "dro":
            m = build_dro_two_stage(inst, scenario_samples(tree), epsilon)
        else:
            m = build(formulation(model, transformed), inst, tree, cuts=(cuts == "on"))
    except (ModelError, InstanceError) as exc:
        raise CliError("bad_model", str(exc)) from None
    res = m.solve(solver, **solver_options(solver, time_limit))
    if res.x is None:
        raise CliError("solver_failed", f"{m.kind.value}: solver ended {res.status.value}", EXIT_SOLVER)
    payload = {"model": m.kind.value, "objective": res.objective, "status": res.status.value,
               "bound": res.bound, "nodes": res.nodes}
    if m.tree is not None:
        sol = extract_solution(m, res)
        payload["x"] = {str(n): v.tolist() for n, v in sol.x.items()}
        if sol.s:
            S = sol.s[m.tree.root]
            payload["s_root"] = S.tolist()
    else:
        payload["x"] = {f"{t},{i}": res.value(("x", t, i)) for t in range(1, inst.T + 1) for i in range(inst.M)}
    run.write("solution.json", json.dumps(payload, indent=1, sort_keys=True) + "\n")
    run.finish()
    click.echo(f"objective {res.objective!r} status {res.status.value}")


@cli.command()
@click.option("--mode", type=click.Choice(["R", "P"]), default="R", show_default=True,
              help="R: unprioritized bounds; P: prioritized bounds.")
@click.option("--replications", default=1, show_default=True, type=click.IntRange(min=1),
              help="Generated instances with seeds seed, seed+1, ...")
@click.option("--cuts", type=click.Choice(["on", "off"]), default="off", show_default=True)
@source
@common
@click.pass_context
def bounds(ctx, mode, replications, cuts, instance_path, tree_path, out, threads, time_limit, solver, **kw):
    """VMS and its lower bounds; writes bounds.csv."""
    g = gen_args(kw)
    if instance_path is not None:
        replications = 1
    seeds = [g["seed"] + r for r in range(replications)]
    pairs = []
    for seed in seeds:
        inst, tree = resolve(instance_path, tree_path, mode == "P", **dict(g, seed=seed))
        check_pair("ms-prior" if mode == "P" else "ms", inst, tree)
        pairs.append((seed, inst, tree))
    run = Run(ctx, out, dict(kw, mode=mode, cuts=cuts, instance=instance_path, tree=tree_path, solver=solver,
                             time_limit=time_limit, threads=threads), seeds)
    reports, extra = [], []
    for seed, inst, tree in pairs:
        try:
            reports.append(compute_report(inst, tree, mode, solver, time_limit or None, cuts == "on"))
        except BoundsError as exc:
            raise CliError("bounds_failed", str(exc), EXIT_SOLVER) from None
        extra.append({"seed": seed})
    run.write("bounds.csv", reports_to_csv(reports, extra))
    run.finish()
    for seed, rep in zip(seeds, reports):
        click.echo(f"seed {seed}: vms {rep.vms:.6g} lb {rep.lb:.6g} rgap {rep.rgap:.4g}")


@cli.command()
@click.option("--model", "model_name", default="ms", show_default=True, help="ms or ts.")
@click.option("--eps", default=1e-6, show_default=True, type=click.FloatRange(min=0, min_open=True))
@click.option("--max-iter", default=100, show_default=True, type=click.IntRange(min=1))
@click.option("--optimum/--no-optimum", default=False, help="Also solve exactly and report the empirical ratio.")
@source
@common
@click.pass_context
def approx(ctx, model_name, eps, max_iter, optimum, instance_path, tree_path, out, threads, time_limit, solver,
           **kw):
    """Alternating heuristic; writes trace.csv (iter, objective)."""
    model = canonical_model(model_name)
    if model not in ("ms", "ts"):
        raise CliError("bad_flags", "approx supports --model ms or ts")
    inst, tree = resolve(instance_path, tree_path, False, **gen_args(kw))
    check_pair(model, inst, tree)
    run = Run(ctx, out, dict(kw, model=model, eps=eps, max_iter=max_iter, instance=instance_path, tree=tree_path,
                             solver=solver, time_limit=time_limit, threads=threads), [kw["seed"]])
    algo = approx_multistage if model == "ms" else approx_two_stage
    trace = algo(inst, tree, eps=eps, max_iter=max_iter, lp_solver=solver)
    if optimum:
        res = build(formulation(model, True), inst, tree).solve(solver, **solver_options(solver, time_limit))
        if not res.ok:
            raise CliError("solver_failed", f"exact solve ended {res.status.value}", EXIT_SOLVER)
        trace.with_optimum(res.objective)
    run.write("trace.csv", trace.to_csv())
    summary = {"objective": trace.objective, "iterations": trace.iterations, "termination": trace.reason.value,
               "ratio_bound": trace.ratio_bound, "lp_objective": trace.lp_objective,
               "empirical_ratio": trace.empirical_ratio}
    run.write("approx.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    run.finish()
    click.echo(f"objective {trace.objective!r} after {trace.iterations} iterations ({trace.reason.value})")


def _values(axis: str, text: str) -> list:
    try:
        parts = [p for p in text.split(",") if p.strip()]
        vals = [int(p) if axis in ("C", "T", "M", "N") else float(p) for p in parts]
    except ValueError:
        raise CliError("bad_flags", f"--values must be comma-separated numbers, got {text!r}") from None
    if not vals:
        raise CliError("bad_flags", "--values is empty")
    return vals


@cli.command(name="sweep")
@click.option("--axis", type=click.Choice(AXES), required=True)
@click.option("--values", "values_text", required=True, help="Comma-separated values, e.g. 2,3,4.")
@click.option("--metric", type=click.Choice(METRICS), default="rvms", show_default=True)
@click.option("--mode", type=click.Choice(["R", "P"]), default="R", show_default=True)
@click.option("--seeds", "n_seeds", default=30, show_default=True, type=click.IntRange(min=1))
@click.option("--tree-kind", "kinds", type=click.Choice([k.value for k in TreeKind]), multiple=True,
              default=("sd",), show_default=True)
@click.option("--seed", default=0, show_default=True, type=int, help="First seed.")
@click.option("--stages", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--facilities", default=6, show_default=True, type=click.IntRange(min=1))
@click.option("--customers", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--branches", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--sigma", default=0.8, show_default=True, type=click.FloatRange(min=0))
@click.option("--lambda", "lam", default=0.5, show_default=True, type=click.FloatRange(0, 1))
@common
@click.pass_context
def sweep_cmd(ctx, axis, values_text, metric, mode, n_seeds, kinds, seed, stages, facilities, customers, branches,
              sigma, lam, out, threads, time_limit, solver):
    """Mean metric per parameter value over seeds; writes sweep.csv."""
    values = _values(axis, values_text)
    if metric == "ratio" and mode == "P":
        raise CliError("bad_flags", "the ratio metric applies to mode R only")
    seeds = list(range(seed, seed + n_seeds))
    cfg = SweepConfig(T=stages, M=facilities, N=customers, C=branches, lam=lam, sigma=sigma, mode=mode,
                      solver=solver)
    run = Run(ctx, out, {"axis": axis, "values": values, "metric": metric, "mode": mode, "tree_kinds": list(kinds),
                         "config": asdict(cfg), "threads": threads}, seeds)
    result = sweep(axis, values, kinds, seeds, metric, cfg)
    run.write("sweep.csv", result.to_csv())
    run.finish()
    for row in result.rows:
        click.echo(f"{axis}={row['value']} {row['tree_kind']}: {metric} {row['mean']:.6g} "
                   f"({row['n']} ok, {row['failures']} failed)")


@cli.command()
@click.option("--paths", default=100, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int, help="Master seed.")
@click.option("--lambda", "lams", default=(0.5,), multiple=True, show_default=True, type=click.FloatRange(0, 1))
@click.option("--alpha", default=0.95, show_default=True, type=click.FloatRange(0, 1, max_open=True))
@click.option("--sigma", default=0.8, show_default=True, type=click.FloatRange(min=0))
@click.option("--branches", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--stages", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--tree-kind", type=click.Choice([k.value for k in TreeKind]), default="sd", show_default=True)
@click.option("--instance", "instance_path", default=None, help="Prioritized instance JSON (else the toy network).")
@common
@click.pass_context
def rolling(ctx, paths, seed, lams, alpha, sigma, branches, stages, tree_kind, instance_path, out, threads,
            time_limit, solver):
    """Out-of-sample rolling horizon for both prioritized policies; writes rolling.csv and paths.csv."""
    if instance_path is not None:
        base = _load_instance(instance_path)
    else:
        base = toy_instance(seed, stages, GridConfig(sigma=sigma, alpha=alpha))
    if not base.equal_cost_sites():
        raise CliError("mode_mismatch", "rolling horizon needs equal site costs and capacities within each stage")
    if base.demand_mean is None or base.demand_std is None:
        raise CliError("bad_instance", "rolling horizon needs demand distributions in the instance")
    config = RollingConfig(C=branches, kind=tree_kind, solver=solver, time_limit=time_limit or None)
    run = Run(ctx, out, {"paths": paths, "lambda": list(lams), "alpha": alpha, "sigma": sigma, "stages": stages,
                         "instance": instance_path, "config": asdict(config), "threads": threads}, [seed])
    table = io.StringIO()
    w = csv.DictWriter(table, fieldnames=ROLLING_COLUMNS, lineterminator="\n")
    w.writeheader()
    per_path = io.StringIO()
    pw = csv.writer(per_path, lineterminator="\n")
    pw.writerow(["lambda", "policy", "path", "cost"])
    for lam in lams:
        inst = base.with_risk(lam=lam, alpha=alpha)
        for policy in Policy:
            r = rolling_horizon(inst, config, policy, paths, seed)
            w.writerow({"lambda": lam, "policy": policy.value, "p95": repr(r.p95), "p75": repr(r.p75),
                        "mean": repr(r.mean), "s0": "-".join(map(str, r.first_list)),
                        "time": f"{r.in_sample_time:.3f}", "n_paths": r.n_paths, "infeasible": r.infeasible})
            for k, cost in enumerate(r.costs):
                pw.writerow([lam, policy.value, k, repr(cost)])
            click.echo(f"lambda {lam} {policy.value}: mean {r.mean:.6g} p95 {r.p95:.6g} p75 {r.p75:.6g} "
                       f"({r.infeasible} infeasible)")
    run.write("rolling.csv", table.getvalue())
    run.write("paths.csv", per_path.getvalue())
    run.finish()


def golden_rows(solver: str) -> list[dict]:
    rows = []
    for lam in EX1_LAMBDAS:
        inst, tree = example_one(lam)
        rep = compute_report(inst, tree, "R", solver)
        ref = example_one_values(lam)
        ok = (abs(rep.z_ts - ref["z_ts"]) <= GOLDEN_TOL and abs(rep.z_ms - ref["z_ms"]) <= GOLDEN_TOL
              and abs(rep.vms - ref["vms"]) <= GOLDEN_TOL and abs(rep.lb - rep.vms) <= GOLDEN_TOL)
        rows.append({"example": 1, "lambda": lam, "vms": rep.vms, "expected": ref["vms"], "lb": rep.lb,
                     "rgap": rep.rgap, "pass": ok})
    for lam in EX2_LAMBDAS:
        inst, tree = example_two(lam)
        rep = compute_report(inst, tree, "P", solver)
        ok = abs(rep.vms - EX2_VMS) <= GOLDEN_TOL and abs(rep.lb - EX2_VMS) <= GOLDEN_TOL
        rows.append({"example": 2, "lambda": lam, "vms": rep.vms, "expected": EX2_VMS, "lb": rep.lb,
                     "rgap": rep.rgap, "pass": ok})
    return rows


@cli.command()
@click.option("--out", default="out", show_default=True)
@click.option("--solver", type=click.Choice(sorted(SOLVERS)), default="bundled", show_default=True)
@click.pass_context
def golden(ctx, out, solver):
    """Check both hand-solved examples; exits 5 on any mismatch."""
    run = Run(ctx, out, {"solver": solver})
    rows = golden_rows(solver)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        click.echo(f"example {r['example']} lambda {r['lambda']}: vms {r['vms']:.6g} lb {r['lb']:.6g} "
                   f"{'PASS' if r['pass'] else 'FAIL'}")
    run.write("golden.csv", buf.getvalue())
    run.finish()
    if not all(r["pass"] for r in rows):
        raise CliError("golden_mismatch", "at least one example differs from its closed form", EXIT_GOLDEN)


def main(argv=None) -> int:
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        cli.main(args=argv, prog_name="stochfl", standalone_mode=False, obj={"argv": argv})
    except CliError as exc:
        fail(exc)
    except click.exceptions.Abort:
        fail(CliError("aborted", "aborted", 1))
    except click.ClickException as exc:
        fail(CliError("usage", exc.format_message(), EXIT_USAGE))
    return 0


if __name__ == "__main__":
    sys.exit(main())
