"""Command-line entry point: ``ustatlab <subcommand> --config run.json --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance-gate failure under ``--assert``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, FailedRun, UstatlabError
from .experiments import (
    CSV_FIRST_ORDER, CSV_KINETIC, UniformityConfig, chaos_gap, cold_start, decoupling_check,
    run_first_order, run_kinetic, run_uniformity_sweep,
)
from .grids import Grid, GridMeasure
from .interaction import monomial
from .io import RunWriter
from .meanfield import (
    cesaro_entropy, cesaro_fisher, fokker_planck_flow, log_partition_mc, mean_field_energy,
    mean_field_entropy, mean_field_fisher, reference_measure, solve_fixed_point,
)
from .measures import wasserstein2_1d
from .particles import SimConfig, simulate
from .potentials import ModelSpec, _KERNEL_TYPES, verify_assumptions

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4

SUBCOMMANDS = ("check", "simulate", "pde", "kinetic", "fixed-point", "first-order", "rates",
               "uniformity", "chaos-gap", "cesaro", "decoupling")


@dataclass
class RunManifest:
    subcommand: str
    config_path: str
    output_dir: str
    seed_override: Optional[int] = None
    format: str = "csv"
    jobs: int = 1
    plot: bool = False
    assert_gates: bool = False
    force: bool = False


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict) or "model" not in doc:
        raise ConfigError("config needs a top-level 'model' object")
    unknown = set(doc) - {"model", "sim", "grid", "experiment"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    return doc


def _grid(doc, default=(-8.0, 8.0, 801)):
    g = doc.get("grid") or {}
    try:
        return Grid(float(g.get("lo", default[0])), float(g.get("hi", default[1])), int(g.get("m", default[2])))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid block: {exc}") from exc


def _gaussian(grid, spec, mean=0.0, var=1.0):
    spec = spec or {}
    return GridMeasure.gaussian(grid, float(spec.get("mean", mean)), float(spec.get("var", var)))


def _seed(manifest, exp, key="seed"):
    return manifest.seed_override if manifest.seed_override is not None else int(exp.get(key, 0))


def _is_linear_gaussian(model):
    return (model.confinement.tag == "quadratic" and model.dimension == 1
            and all(k.kind == "quadratic_pair" for k in model.kernels))


# ---------------------------------------------------------------- handlers
# each returns (results payload, gates dict)


def cmd_check(model, doc, exp, man, w):
    box = exp.get("probe_box", [-4.0, 4.0])
    rep = verify_assumptions(model, box, int(exp.get("n_probes", 1000)), _seed(man, exp, "seed"),
                             h2_c1=exp.get("h2_c1"))
    gates = {"H2_verified": rep["H2"].status == "verified"}
    return {"assumptions": rep.to_dict()}, gates


def _sim_config(doc, man, exp):
    s = doc.get("sim") or {}
    try:
        return SimConfig(dt=float(s["dt"]), horizon=float(s["horizon"]), n=int(s["n"]),
                         replicas=int(s.get("replicas", 1)), record_every=int(s.get("record_every", 1)),
                         master_seed=_seed(man, s, "seed"), scheme=exp.get("scheme", s.get("scheme", "euler_maruyama")))
    except KeyError as exc:
        raise ConfigError(f"sim block is missing {exc}") from exc


def cmd_simulate(model, doc, exp, man, w):
    cfg = _sim_config(doc, man, exp)
    initial = exp.get("initial", {"type": "gaussian", "mean": 0.0, "var": 1.0})
    rec = simulate(model, cfg, initial)
    ser = rec.series
    rows = np.column_stack([rec.times, ser["mean"][:, 0], ser["var"][:, 0], ser["hamiltonian"]])
    w.table("series", ("t", "mean", "var", "hamiltonian"), rows)
    final = rec.snapshots[-1][0]
    cols = [np.arange(cfg.n), *final.T]
    header = ["particle_index"] + [f"coord_{c}" for c in range(model.dimension)]
    if rec.velocity_snapshots:
        cols += list(rec.velocity_snapshots[-1][0].T)
        header += [f"vel_{c}" for c in range(model.dimension)]
    w.table("snapshot_final", header, np.column_stack(cols))
    if man.plot:
        w.svg("plot", {"mean": (rec.times, ser["mean"][:, 0]), "var": (rec.times, ser["var"][:, 0])},
              "particle moments")
    return {"sim": cfg.to_dict(), "final_mean": ser["mean"][-1], "final_var": ser["var"][-1]}, {}


def cmd_pde(model, doc, exp, man, w):
    grid = _grid(doc)
    mu0 = _gaussian(grid, exp.get("mu0"), 2.0, 1.0)
    dt = float(exp.get("dt", 1e-4))
    horizon = float(exp.get("horizon", 5.0))
    every = int(exp.get("record_every", max(1, round(0.05 / dt))))
    fp = solve_fixed_point(model, grid, tol=float(exp.get("tol", 1e-10)), max_iter=5000, init=mu0)
    times, ms = fokker_planck_flow(mu0, model, dt, horizon, every)
    alpha = reference_measure(model, grid)
    E = np.array([mean_field_energy(m, model, alpha).total for m in ms])
    H = E - mean_field_energy(fp.measure, model, alpha).total
    I = np.array([mean_field_fisher(m, model, alpha) for m in ms])
    W2 = np.array([wasserstein2_1d(m, fp.measure) for m in ms])
    rows = np.column_stack([times, E, H, I, W2, [m.mean() for m in ms], [m.var() for m in ms]])
    w.table("flow", CSV_FIRST_ORDER, rows)
    w.table("final_density", ("x", "density"), ms[-1].to_csv_rows())
    if man.plot:
        w.svg("plot", {"H_W": (times, H), "W2": (times, W2)}, "free-energy flow", logy=True)
    gates = {"energy_dissipation": bool(np.max(np.diff(E), initial=-np.inf) <= 1e-8)}
    return {"grid": grid.to_dict(), "dt": dt, "horizon": horizon,
            "energy_max_increase": float(np.max(np.diff(E), initial=0.0))}, gates


def cmd_first_order(model, doc, exp, man, w):
    grid = _grid(doc)
    mu0 = _gaussian(grid, exp.get("mu0"), 2.0, 1.0)
    dt = float(exp.get("dt", 1e-4))
    horizon = float(exp.get("horizon", 5.0))
    window = tuple(exp.get("window", (0.5, horizon)))
    rep = run_first_order(model, grid, mu0, horizon, dt, window=window)
    w.table("flow", CSV_FIRST_ORDER, rep.csv_rows())
    if man.plot:
        w.svg("plot", {"H_W": (rep.times, rep.entropy_series.values),
                       "W2": (rep.times, rep.w2_series.values)}, "decay", logy=True)
    ef, wf = rep.entropy_series.fit, rep.w2_series.fit
    H = rep.entropy_series.values
    gates = {
        "entropy_strictly_decreasing": bool(np.all(np.diff(H) < 0)),
        "entropy_r2_ge_0.99": bool(ef is not None and ef.r_squared >= 0.99),
        "w2_rate_ge_0.45_entropy_rate": bool(ef is not None and wf is not None
                                             and wf.r_squared >= 0.95 and wf.rate >= 0.45 * ef.rate),
        "talagrand_margin_ge_-10pct": bool(rep.talagrand_relative is not None
                                           and rep.talagrand_relative >= -0.10),
        "energy_dissipation": bool(rep.energy_max_increase <= 1e-8),
    }
    extra = {}
    if _is_linear_gaussian(model):
        # closed form: mean decays at rate 2a, stationary precision 2a + lambda
        m0 = mu0.mean()
        a2 = model.confinement.curvature_bound
        err = float(np.max(np.abs(rep.mean - m0 * np.exp(-a2 * rep.times))))
        var_inf = 1.0 / (a2 + sum(k.params.get("lambda", 0.0) for k in model.kernels))
        var_fp = rep.fixed_point.measure.var()
        extra = {"mean_oracle_sup_error": err, "stationary_var": var_fp, "stationary_var_oracle": var_inf}
        gates["mean_oracle_within_1pct"] = bool(err <= 0.01 * max(abs(m0), 1e-12))
        gates["stationary_var_within_1pct"] = bool(abs(var_fp - var_inf) <= 0.01 * var_inf)
    return {"grid": grid.to_dict(), "dt": dt, "horizon": horizon, "first_order": rep.to_dict(), **extra}, gates


def cmd_kinetic(model, doc, exp, man, w):
    xg = _grid(doc, (-8.0, 8.0, 161))
    vg_doc = exp.get("vgrid", {"lo": -6.0, "hi": 6.0, "m": 121})
    vg = Grid(float(vg_doc["lo"]), float(vg_doc["hi"]), int(vg_doc["m"]))
    cs = exp.get("cold_start", {})
    mu0 = cold_start(xg, vg, float(cs.get("x_mean", 0.0)), float(cs.get("x_var", 1.0)),
                     float(cs.get("v_var", 0.1)))
    horizon = float(exp.get("horizon", 6.0))
    dt = float(exp.get("dt", 0.005))
    window = tuple(exp.get("window", (1.0, horizon)))
    rep = run_kinetic(model, xg, vg, mu0, horizon, dt, int(exp.get("record_every", 10)), window)
    w.table("kinetic", CSV_KINETIC, rep.csv_rows())
    if man.plot:
        w.svg("plot", {"S": (rep.times, rep.S_series.values)}, "kinetic free energy", logy=True)
    sf = rep.S_series.fit
    gates = {
        "S_non_increasing": bool(rep.max_step_increase <= 1e-8),
        "S_r2_ge_0.97": bool(sf is not None and sf.r_squared >= 0.97),
        "velocity_w2_le_0.02": bool(rep.w2v_series.values[-1] <= 0.02),
    }
    return {"kinetic": rep.to_dict()}, gates


def cmd_fixed_point(model, doc, exp, man, w):
    grid = _grid(doc)
    init = _gaussian(grid, exp["init"]) if "init" in exp else None
    fp = solve_fixed_point(model, grid, tol=float(exp.get("tol", 1e-10)),
                           max_iter=int(exp.get("max_iter", 500)), init=init)
    w.table("fixed_point", ("x", "density"), fp.measure.to_csv_rows())
    fisher = mean_field_fisher(fp.measure, model)
    gates = {"contraction_lt_0.9": fp.contraction_estimate < 0.9, "fisher_le_1e-6": fisher <= 1e-6}
    return {"fixed_point": fp.to_dict(), "fisher": fisher}, gates


def cmd_uniformity(model, doc, exp, man, w):
    cfg = UniformityConfig(
        total_particles=int(exp.get("total_particles", 32768)), dt=float(exp.get("dt", 0.05)),
        horizon=float(exp.get("horizon", 8.0)), record_every=int(exp.get("record_every", 2)),
        window=tuple(exp.get("window", (1.0, 8.0))),
        initial=exp.get("initial", UniformityConfig().initial),
        master_seed=_seed(man, exp), batches=int(exp.get("batches", 32)), grid=_grid(doc, (-12.0, 12.0, 1201)))
    table = run_uniformity_sweep(model, exp.get("ns", [64, 128, 256, 512]), cfg, jobs=man.jobs)
    w.table("sweep", ("n", "rate", "r_squared", "replicas", "rate_se"),
            [[r.n, r.rate, r.r_squared, r.replicas, r.rate_se] for r in table.rows])
    gates = {"all_r2_ge_0.95": all(r.r_squared >= 0.95 for r in table.rows),
             "rate_ratio_le_1.25": table.rate_ratio <= 1.25, "no_skipped_rows": not table.skipped}
    return {"config": cfg.to_dict(), "sweep": table.to_dict()}, gates


def cmd_chaos_gap(model, doc, exp, man, w):
    grid = _grid(doc)
    mu0 = _gaussian(grid, exp.get("mu0"), 2.0, 1.0)
    t_check = float(exp.get("t_check", 2.0))
    ns = [int(n) for n in exp.get("ns", [500, 1000, 2000])]
    replicas = int(exp.get("replicas", 8))
    pde_dt = float(exp.get("pde_dt", 1e-4))
    _, ms = fokker_planck_flow(mu0, model, pde_dt, t_check, record_every=10 ** 9) if t_check > 0 else (None, [mu0])
    res = [chaos_gap(model, n, t_check, replicas, grid, mu0, dt=float(exp.get("dt", 0.005)),
                     seed=_seed(man, exp), pde_measure=ms[-1]) for n in ns]
    w.table("chaos_gap", ("n", "w2_pooled", "w2_per_replica_mean"),
            [[r.n, r.value, r.per_replica_mean] for r in res])
    vals = [r.value for r in res]
    gates = {"largest_n_le_0.05": vals[-1] <= 0.05,
             "decreasing_in_n": all(b < a for a, b in zip(vals, vals[1:]))}
    return {"chaos_gap": [r.to_dict() for r in res]}, gates


def cmd_cesaro(model, doc, exp, man, w):
    grid = _grid(doc, (-8.0, 8.0, 1601))
    nu = _gaussian(grid, exp.get("nu"), 1.0, 1.0)
    ns = [int(n) for n in exp.get("ns", [4, 8, 16, 32])]
    n_samples = int(exp.get("n_samples", 200000))
    seed = _seed(man, exp)
    fp = solve_fixed_point(model, grid, tol=1e-12, max_iter=5000, init=nu)
    target = mean_field_entropy(nu, model, fp.measure)
    fisher_target = mean_field_fisher(nu, model)
    rows, out = [], []
    for n in ns:
        ce = cesaro_entropy(nu, model, n, n_samples, seed, grid=grid)
        cf = cesaro_fisher(nu, model, n, max(1, n_samples // 2), seed)
        rows.append([n, ce.value, ce.stderr, abs(ce.value - target), cf.value, cf.stderr])
        out.append({"n": n, "entropy": ce.value, "stderr": ce.stderr, "fisher": cf.value,
                    "fisher_stderr": cf.stderr})
    w.table("cesaro", ("n", "entropy", "stderr", "abs_gap", "fisher", "fisher_stderr"), rows)
    gaps = [r[3] for r in rows]
    gates = {"gap_decreasing": all(b < a for a, b in zip(gaps, gaps[1:])),
             "last_within_5pct_3se": gaps[-1] <= 0.05 * abs(target) + 3 * rows[-1][2]}
    return {"target_H_W": target, "target_I_W": fisher_target, "rows": out}, gates


def cmd_decoupling(model, doc, exp, man, w):
    kd = exp.get("kernel")
    if kd is None:
        if not model.kernels:
            raise ConfigError("decoupling needs experiment.kernel or a model kernel")
        kern = model.kernels[0]
    else:
        if kd.get("type") not in _KERNEL_TYPES:
            raise ConfigError(f"unknown kernel type {kd.get('type')!r}")
        kern = _KERNEL_TYPES[kd["type"]](kd.get("order"), dict(kd.get("params", {})))
    res = decoupling_check(kern, exp.get("sample_law", "gaussian"), exp.get("psi", "abs"),
                           int(exp.get("n", 20)), int(exp.get("trials", 200)), _seed(man, exp),
                           samples=int(exp.get("samples", 400)), lam=float(exp.get("lambda", 0.1)))
    gates = {"all_trials_pass": res.passed, "log_laplace_bound": res.lambda_pass}
    return {"kernel": kern.to_dict(), "decoupling": res.to_dict()}, gates


HANDLERS = {
    "check": cmd_check, "simulate": cmd_simulate, "pde": cmd_pde, "kinetic": cmd_kinetic,
    "fixed-point": cmd_fixed_point, "first-order": cmd_first_order, "rates": cmd_first_order,
    "uniformity": cmd_uniformity, "chaos-gap": cmd_chaos_gap, "cesaro": cmd_cesaro,
    "decoupling": cmd_decoupling,
}


def dispatch(manifest: RunManifest) -> int:
    try:
        doc = load_config(manifest.config_path)
        model = ModelSpec.from_dict(doc["model"])
        writer = RunWriter(manifest.output_dir, force=manifest.force, fmt=manifest.format)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    exp = doc.get("experiment") or {}
    echo = {"subcommand": manifest.subcommand, "config": doc, "seed_override": manifest.seed_override}
    try:
        results, gates = HANDLERS[manifest.subcommand](model, doc, exp, manifest, writer)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FailedRun as exc:
        writer.report({**echo, "status": "failed", "diagnostic": exc.diagnostic()})
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc!r}", file=sys.stderr)
        return EXIT_CONFIG
    except UstatlabError as exc:
        writer.report({**echo, "status": "failed", "diagnostic": {"error": type(exc).__name__,
                                                                  "message": str(exc)}})
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    failed = [k for k, ok in gates.items() if not ok]
    status = "ok" if not failed else "gates_failed"
    writer.report({**echo, "status": status, "results": results, "gates": gates})
    if manifest.assert_gates and failed:
        print("acceptance gates failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ustatlab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--assert", dest="assert_gates", action="store_true")
    p.add_argument("--force", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    man = RunManifest(args.subcommand, args.config, args.out, args.seed, args.format,
                      max(1, args.jobs), args.plot, args.assert_gates, args.force)
    return dispatch(man)


if __name__ == "__main__":
    sys.exit(main())
