"""Matplotlib rendering of the standard reports, written next to the CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import empirical_cdf
from .scenario import Layout


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_layout(layout: Layout, radius_m: float, path: str):
    fig, ax = plt.subplots(figsize=(5, 5))
    circle = plt.Circle((0, 0), radius_m, fill=False, ls="--", color="gray")
    ax.add_patch(circle)
    ax.scatter(*layout.trau_xy.T, marker="^", c="tab:blue", label="T-RAU")
    ax.scatter(*layout.rrau_xy.T, marker="v", c="tab:red", label="R-RAU")
    ax.scatter(*layout.dl_user_xy.T, marker="o", c="tab:green", label="DL user")
    ax.scatter(*layout.ul_user_xy.T, marker="s", c="tab:orange", label="UL user")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"{layout.mode} layout")
    return _save(fig, path)


def plot_convergence(trace, path: str):
    iters = [row["iter"] for row in trace]
    true = [row["true_obj_bpshz"] for row in trace]
    surr = [row["surrogate_obj_bpshz"] for row in trace]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iters, true, "o-", ms=3, label="weighted sum rate")
    ax.plot(iters, surr, "--", lw=1, label="surrogate objective")
    ax.set_xlabel("iteration")
    ax.set_ylabel("bps/Hz")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_bit_sweep(results: dict, path: str):
    """results: {(mode, bits): per-trial objective array}."""
    fig, ax = plt.subplots(figsize=(6, 4))
    modes = sorted({m for m, _ in results})
    for mode in modes:
        bits = sorted(b for m, b in results if m == mode)
        means = [results[(mode, b)].mean() for b in bits]
        ax.plot(bits, means, "o-", label=mode)
    ax.set_xlabel("DAC bits")
    ax.set_ylabel("mean weighted sum rate (bps/Hz)")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_cdfs(results: dict, path: str):
    """results: {(bits, cap): per-trial objective array}."""
    fig, ax = plt.subplots(figsize=(6, 4))
    cmap = plt.get_cmap("tab10")
    bits_all = sorted({b for b, _ in results})
    caps = sorted({c for _, c in results})
    styles = ["-", "--", ":"]
    for i, b in enumerate(bits_all):
        for j, c in enumerate(caps):
            if (b, c) not in results:
                continue
            v, p = empirical_cdf(results[(b, c)])
            ax.plot(v, p, styles[j % len(styles)], color=cmap(i % 10),
                    lw=1.2, label=f"B={b}, C={c:g}")
    ax.set_xlabel("weighted sum rate (bps/Hz)")
    ax.set_ylabel("CDF")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)
