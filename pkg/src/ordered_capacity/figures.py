"""Matplotlib renderings written next to the CSV artifacts.

Figures are a convenience view of the delimited output; the CSVs stay the
canonical artifacts.  Everything renders through the Agg backend so the
CLI works headless.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_DPI = 150


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def metrics_figure(metrics, rates, path):
    levels = range(1, metrics.depth + 1)
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    ax = axes[0, 0]
    ax.semilogy(levels, rates[: metrics.depth], "o-", ms=3)
    ax.set_xlabel("n")
    ax.set_ylabel("service rate")
    ax = axes[0, 1]
    ax.semilogy(levels, metrics.p, "o-", ms=3)
    ax.set_xlabel("n")
    ax.set_ylabel("blocking probability")
    ax = axes[1, 0]
    ax.plot(levels, metrics.ell, "o-", ms=3, label="blocking ratio")
    ax.plot(levels, metrics.ell_lower, "s--", ms=3, label="lower bound")
    ax.set_xlabel("n")
    ax.legend(fontsize=8)
    ax = axes[1, 1]
    ax.semilogy(range(metrics.depth + 1), metrics.rho_eff, "o-", ms=3)
    ax.set_xlabel("n")
    ax.set_ylabel("effective utilization")
    fig.suptitle(f"depth-{metrics.depth} metrics; total delay {metrics.delay_total:.4g}")
    return _save(fig, path)


def feasibility_figure(report, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    levels = range(1, report.checked_depth + 1)
    colors = ["tab:red" if m >= 0 else "tab:blue" for m in report.margins]
    ax.bar(levels, report.margins, color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("n")
    ax.set_ylabel("arrival-rate margin")
    ax.set_title(f"verdict: {report.verdict}")
    return _save(fig, path)


def ellcurves_figure(curves, path):
    """curves: {level: (alphas, values)}."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for level in sorted(curves):
        alphas, values = curves[level]
        ax.plot(alphas, values, lw=1.2, label=f"n={level}")
    ax.set_xlabel("first-server share")
    ax.set_ylabel("per-level blocking ratio")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8, ncol=2)
    return _save(fig, path)


def allocation_figure(rates, path, title=None):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(range(1, len(rates) + 1), rates, "o-", ms=3)
    ax.set_xlabel("n")
    ax.set_ylabel("service rate")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def optimize_figure(result, path):
    m = result.metrics
    levels = range(1, m.depth + 1)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    axes[0].semilogy(levels, result.allocation.rates[: m.depth], "o-", ms=3)
    axes[0].set_xlabel("n")
    axes[0].set_ylabel("optimized rate")
    axes[1].plot(levels, m.ell, "o-", ms=3, label="blocking ratio")
    axes[1].plot(levels, m.ell_lower, "s--", ms=3, label="lower bound")
    axes[1].set_xlabel("n")
    axes[1].legend(fontsize=8)
    axes[2].plot(range(len(result.trace)), result.trace, "o-", ms=3)
    axes[2].set_xlabel("sweep")
    axes[2].set_ylabel("objective")
    fig.suptitle(f"objective {result.objective_value:.5g}, residual {result.residual:.3g}")
    return _save(fig, path)


def simulate_figure(result, analytic_p, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    levels = range(1, result.n_servers + 1)
    ax.errorbar(levels, result.p_hat, yerr=3.0 * result.p_se, fmt="o", ms=4,
                capsize=3, label="simulated (3 s.e.)")
    if analytic_p is not None:
        ax.plot(levels, analytic_p, "x--", label="analytic")
    ax.set_yscale("log")
    ax.set_xlabel("j")
    ax.set_ylabel("P(servers 1..j busy)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def grid_figures(cells, out_dir):
    """Per-cell series panels plus the first-rate-vs-utilization chart.

    cells: list of dicts with keys k, rho, rates, ell, rho_eff, mu1.
    """
    paths = []
    rhos = sorted({c["rho"] for c in cells})
    ks = sorted({c["k"] for c in cells})
    for field, fname, ylabel, logy in (
        ("rates", "fig_series.png", "service rate", True),
        ("ell", "fig_lst.png", "blocking ratio", False),
        ("rho_eff", "fig_rho.png", "effective utilization", True),
    ):
        ncol = 2 if len(rhos) > 1 else 1
        nrow = (len(rhos) + ncol - 1) // ncol
        fig, axes = plt.subplots(nrow, ncol, figsize=(5.5 * ncol, 3.2 * nrow), squeeze=False)
        for i, rho in enumerate(rhos):
            ax = axes[i // ncol][i % ncol]
            for k in ks:
                match = [c for c in cells if c["rho"] == rho and c["k"] == k]
                if not match:
                    continue
                series = match[0][field]
                start = 0 if field == "rho_eff" else 1
                ax.plot(range(start, start + len(series)), series, "o-", ms=2.5,
                        lw=1.0, label=f"k={k:g}")
            if logy:
                ax.set_yscale("log")
            ax.set_title(f"utilization {rho:g}", fontsize=9)
            ax.set_xlabel("n", fontsize=8)
            ax.set_ylabel(ylabel, fontsize=8)
            ax.legend(fontsize=7)
        paths.append(_save(fig, os.path.join(out_dir, fname)))
    poisson = sorted((c["rho"], c["mu1"]) for c in cells if c["k"] == 1.0)
    if poisson:
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        xs = [p[0] for p in poisson]
        ax.plot(xs, [p[1] for p in poisson], "o-", label="optimized first rate")
        grid = [x / 100 for x in range(1, 100)]
        ax.plot(grid, [1 - x ** 0.5 for x in grid], "--", label="1 - sqrt(rho)")
        ax.set_xlabel("utilization")
        ax.set_ylabel("first service rate")
        ax.legend(fontsize=8)
        paths.append(_save(fig, os.path.join(out_dir, "fig_mu1.png")))
    return paths
