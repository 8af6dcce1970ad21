"""Experiment orchestration: mode dispatch, CSV artifacts, figures.

Every mode writes schema-stable CSV files into the output directory and
prints a compact text table.  Grid cells run in a process pool; results are
assembled in a fixed order so artifacts are byte-identical across runs.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import figures
from .chain import OverflowChain
from .config import build_allocation
from .geometric import ell_alpha_curve, tap_objective_value, tap_solution
from .metrics import blocking_probabilities, compute_metrics
from .optimizer import OptimizerConfig, optimize_allocation
from .report import render_table, write_csv
from .simulate import SimConfig, simulate
from .stability import finite_delay_diagnostics, is_feasible

log = logging.getLogger("ordered_capacity")

METRICS_HEADER = ["n", "mu_n", "p_n", "q_n", "ell_n", "ell_lower_n", "rho_n", "rho_prev_n"]


def run(cfg, out_dir=None, workers=1):
    """Dispatch one experiment; returns the list of files written."""
    out = out_dir or cfg.out_dir or "results"
    os.makedirs(out, exist_ok=True)
    runner = {
        "metrics": _run_metrics,
        "feasibility": _run_feasibility,
        "ellcurves": _run_ellcurves,
        "tap": _run_tap,
        "optimize": _run_optimize,
        "simulate": _run_simulate,
        "papergrid": _run_papergrid,
    }[cfg.mode]
    log.info("mode=%s out=%s workers=%d", cfg.mode, out, workers)
    return runner(cfg, out, workers)


def _metric_rows(allocation, metrics):
    rows = []
    for n in range(1, metrics.depth + 1):
        rows.append((
            n,
            allocation.rates[n - 1],
            float(metrics.p[n - 1]),
            float(metrics.q[n - 1]),
            float(metrics.ell[n - 1]),
            float(metrics.ell_lower[n - 1]),
            float(metrics.rho_eff[n]),
            float(metrics.rho_eff[n - 1]),  # figure-axis convention: rho_{n-1} at n
        ))
    return rows


def _run_metrics(cfg, out, workers):
    allocation = build_allocation(cfg)
    metrics = compute_metrics(cfg.model, allocation, depth=allocation.depth)
    rows = _metric_rows(allocation, metrics)
    files = [write_csv(os.path.join(out, "metrics.csv"), METRICS_HEADER, rows)]
    print(render_table(METRICS_HEADER, rows))
    print(f"truncated delay {metrics.delay_truncated:.6g}  residual {metrics.residual:.6g}"
          f"  total {metrics.delay_total:.6g}")
    if cfg.figures:
        files.append(figures.metrics_figure(
            metrics, allocation.rates, os.path.join(out, "metrics.png")))
    return files

def _run_feasibility(cfg, out, workers):
    allocation = build_allocation(cfg)
    depth = min(cfg.get("feas.depth"), allocation.depth)
    chain = OverflowChain(cfg.model, allocation, n_max=max(depth, 25))
    report = is_feasible(chain, depth)
    fd = finite_delay_diagnostics(chain, depth)
    p = blocking_probabilities(chain, depth)
    header = ["n", "p_n", "margin_n", "remaining_capacity", "feasible"]
    rows = [
        (n, float(p[n - 1]), report.margins[n - 1],
         allocation.remaining(n), report.margins[n - 1] < 0.0)
        for n in range(1, depth + 1)
    ]
    files = [write_csv(os.path.join(out, "feasibility.csv"), header, rows)]
    print(render_table(header, rows))
    print(f"verdict: {report.verdict}"
          + (f" (first violation at level {report.violation_level})"
             if report.violation_level else ""))
    print(f"finite-delay heuristic: {fd.verdict} "
          f"(ell estimate {fd.ell_estimate:.6g}, tail ratio {fd.tail_decay_ratio})")
    if cfg.figures:
        files.append(figures.feasibility_figure(report, os.path.join(out, "feasibility.png")))
    return files


def _run_ellcurves(cfg, out, workers):
    lo, hi = cfg.get("curves.alpha_min"), cfg.get("curves.alpha_max")
    count = cfg.get("curves.alpha_count")
    levels = cfg.int_list("curves.levels")
    alphas = np.linspace(lo, hi, count)
    header = ["alpha", "n", "ell_n_alpha"]
    rows = []
    curves = {}
    for level in levels:
        values = ell_alpha_curve(cfg.model, alphas, level, mu=cfg.mu)
        curves[level] = (alphas, values)
        rows.extend((float(a), level, float(v)) for a, v in zip(alphas, values))
    files = [write_csv(os.path.join(out, "ellcurves.csv"), header, rows)]
    print(f"wrote {len(rows)} curve points for levels {levels}")
    if cfg.figures:
        files.append(figures.ellcurves_figure(curves, os.path.join(out, "ellcurves.png")))
    return files


def _run_tap(cfg, out, workers):
    ell = cfg.require("alloc.ell")
    depth = cfg.get("alloc.depth")
    allocation = tap_solution(ell, mu=cfg.mu, depth=depth)
    header = ["n", "mu_n"]
    rows = [(n, allocation.rates[n - 1]) for n in range(1, depth + 1)]
    files = [write_csv(os.path.join(out, "tap.csv"), header, rows)]
    print(render_table(header, rows))
    print(f"tail-program objective at the optimum: {tap_objective_value(ell):.6g}")
    if cfg.figures:
        files.append(figures.allocation_figure(
            allocation.rates, os.path.join(out, "tap.png"),
            title=f"constant-blocking optimum, ell={ell:g}"))
    return files


def _optimizer_config(cfg):
    return OptimizerConfig(
        horizon=cfg.get("opt.M"),
        tol_rate=cfg.get("opt.tol_rate"),
        tol_objective=cfg.get("opt.tol_obj"),
        max_sweeps=cfg.get("opt.max_sweeps"),
        restarts=cfg.get("opt.restarts"),
        objective=cfg.get("opt.objective"),
        tau=cfg.get("opt.tau"),
        seed=cfg.get("opt.seed"),
    )


def _run_optimize(cfg, out, workers):
    result = optimize_allocation(cfg.model, cfg.mu, _optimizer_config(cfg))
    rows = _metric_rows(result.allocation, result.metrics)
    files = [write_csv(os.path.join(out, "optimize_allocation.csv"), METRICS_HEADER, rows)]
    summary_header = ["objective", "residual", "sweeps", "converged", "restarts"]
    summary_rows = [(result.objective_value, result.residual, result.sweeps,
                     result.converged, result.restarts_run)]
    files.append(write_csv(os.path.join(out, "optimize_summary.csv"),
                           summary_header, summary_rows))
    files.append(write_csv(os.path.join(out, "optimize_trace.csv"),
                           ["sweep", "objective"],
                           list(enumerate(result.trace))))
    print(render_table(METRICS_HEADER, rows))
    print(render_table(summary_header, summary_rows))
    if cfg.figures:
        files.append(figures.optimize_figure(result, os.path.join(out, "optimize.png")))
    return files


def _run_simulate(cfg, out, workers):
    allocation = build_allocation(cfg)
    levels = cfg.get("sim.levels") or allocation.depth
    rates = allocation.materialize(levels).rates[:levels]
    sim_cfg = SimConfig(
        model=cfg.model,
        rates=rates,
        arrivals=cfg.get("sim.arrivals"),
        warmup=cfg.get("sim.warmup"),
        seed=cfg.get("sim.seed"),
    )
    result = simulate(sim_cfg)
    header = ["j", "p_hat", "p_se", "q_hat", "delay_mean", "delay_se", "overflow_mean"]
    rows = [
        (j, float(result.p_hat[j - 1]), float(result.p_se[j - 1]),
         float(result.q_hat[j - 1]), result.delay_mean, result.delay_se,
         float(result.overflow_mean[j]))
        for j in range(1, len(rates) + 1)
    ]
    files = [write_csv(os.path.join(out, "simulate.csv"), header, rows)]
    print(render_table(header, rows))
    analytic = None
    try:
        chain = OverflowChain(cfg.model, allocation.materialize(levels), n_max=max(levels, 25))
        analytic = blocking_probabilities(chain, levels)
    except Exception:  # diagnostic overlay only
        log.warning("analytic overlay unavailable", exc_info=True)
    if cfg.figures:
        files.append(figures.simulate_figure(result, analytic, os.path.join(out, "simulate.png")))
    return files


def _grid_cell(args):
    """One optimizer cell of the utilization/shape grid (process-pool entry)."""
    lam, k, mu, opt_kwargs = args
    from .arrivals import GammaArrivals

    model = GammaArrivals(lam=lam, k=k)
    result = optimize_allocation(model, mu, OptimizerConfig(**opt_kwargs))
    m = result.metrics
    return {
        "k": k,
        "rho": lam / mu,
        "ES": result.objective_value,
        "rM": result.residual,
        "mu1": result.allocation.rates[0],
        "rates": list(result.allocation.rates[: m.depth]),
        "ell": [float(v) for v in m.ell],
        "rho_eff": [float(v) for v in m.rho_eff],
        "p": [float(v) for v in m.p],
    }


def _run_papergrid(cfg, out, workers):
    rhos = cfg.float_list("grid.rho")
    ks = cfg.float_list("grid.k")
    opt_kwargs = {
        "horizon": cfg.get("opt.M"),
        "tol_rate": cfg.get("opt.tol_rate"),
        "tol_objective": cfg.get("opt.tol_obj"),
        "max_sweeps": cfg.get("opt.max_sweeps"),
        "restarts": cfg.get("opt.restarts"),
        "seed": cfg.get("opt.seed"),
    }
    tasks = [(rho * cfg.mu, k, cfg.mu, opt_kwargs) for k in ks for rho in rhos]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_grid_cell, tasks))
    else:
        cells = [_grid_cell(t) for t in tasks]
    files = []
    table_header = ["k", "rho", "ES", "rM"]
    table_rows = [(c["k"], c["rho"], c["ES"], c["rM"]) for c in cells]
    files.append(write_csv(os.path.join(out, "table1.csv"), table_header, table_rows))
    for c in cells:
        name = f"series_k{c['k']:g}_rho{c['rho']:g}.csv"
        rows = [
            (n, c["rates"][n - 1], c["ell"][n - 1], c["rho_eff"][n])
            for n in range(1, len(c["rates"]) + 1)
        ]
        files.append(write_csv(os.path.join(out, name),
                               ["n", "mu_n", "ell_n", "rho_n"], rows))
    fig6_rows = [
        (c["rho"], c["mu1"], 1.0 - math.sqrt(c["rho"]))
        for c in cells if c["k"] == 1.0
    ]
    files.append(write_csv(os.path.join(out, "fig6.csv"),
                           ["rho", "mu1", "one_minus_sqrt_rho"], fig6_rows))
    print(render_table(table_header, table_rows))
    if cfg.figures:
        files.extend(figures.grid_figures(cells, out))
    return files
