"""Figure rendering for the report paths. Headless-safe (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_STRATEGY_COLORS = {
    "random": "tab:gray",
    "nn": "tab:green",
    "mmr": "tab:red",
    "dl_mmr": "tab:blue",
}


def save_bench_figure(reports, path) -> Path:
    """Construction time and estimated memory vs pool size, per strategy."""
    path = Path(path)
    fig, (ax_time, ax_mem) = plt.subplots(1, 2, figsize=(9.0, 3.5))
    strategies = []
    for rep in reports:
        if rep.strategy not in strategies:
            strategies.append(rep.strategy)
    for strategy in strategies:
        cells = [r for r in reports if r.strategy == strategy]
        color = _STRATEGY_COLORS.get(strategy)
        sized = [(c.n, c.t_construct_ms) for c in cells if c.t_construct_ms is not None]
        if sized:
            ns, ts = zip(*sized)
            ax_time.plot(ns, ts, marker="o", label=strategy, color=color)
        ns = [c.n for c in cells]
        est = [max(c.est_bytes, 1) for c in cells]  # log axis, 0 entries -> 1 byte floor
        ax_mem.plot(ns, est, marker="s", linestyle="--", label=strategy, color=color)
    ax_time.set_xlabel("pool size n")
    ax_time.set_ylabel("construction time (ms)")
    ax_time.set_xscale("log")
    ax_time.set_yscale("log")
    ax_time.legend(fontsize=8)
    ax_mem.set_xlabel("pool size n")
    ax_mem.set_ylabel("estimated prep bytes")
    ax_mem.set_xscale("log")
    ax_mem.set_yscale("log")
    ax_mem.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_figure(rows, path) -> Path:
    """Selected-exemplar length spread as the trade-off weight moves."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    lams = [row["lambda"] for row in rows]
    spread = [row["len_std"] for row in rows]
    ax.plot(lams, spread, marker="o", color="tab:blue")
    ax.set_xlabel("lambda")
    ax.set_ylabel("selected length std (words)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_eval_figure(report, path) -> Path:
    """Bar chart of the aggregate scores; the CR gap rides in the title."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    names = ["R-1", "R-2", "R-L"]
    values = [report.r1, report.r2, report.rl]
    ax.bar(names, values, color=["tab:blue", "tab:orange", "tab:green"])
    ax.set_ylabel("F1 x 100")
    ax.set_ylim(0, 100)
    ax.set_title(f"delta CR = {report.delta_cr:+.2f} pp", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
