"""Figure rendering for the CLI report paths.

Each report-producing command writes its delimited output first and then
renders a companion PNG next to it. Figures are a convenience view of the
same rows that went into the CSV; the CSV stays the primary artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_solution(rows, path) -> None:
    """Scatter of edge nodes colored by potential and by flux."""
    xs = np.array([r[2] for r in rows])
    ys = np.array([r[3] for r in rows])
    us = np.array([r[4] for r in rows])
    vs = np.array([r[5] for r in rows])
    fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.4))
    for ax, vals, label in ((axes[0], us, "potential u"), (axes[1], vs, "flux v")):
        sc = ax.scatter(xs, ys, c=vals, s=14, cmap="viridis")
        ax.set_aspect("equal")
        ax.set_title(label)
        fig.colorbar(sc, ax=ax, shrink=0.85)
    _save(fig, path)


def render_converge(rows, path) -> None:
    """max error against nodes per edge, semilog."""
    n = [r[0] for r in rows]
    e = [max(r[1], 1e-17) for r in rows]
    fig, ax = _new_axes("edge-potential error vs nodes per edge", "n_gauss", "max error")
    ax.semilogy(n, e, "o-")
    _save(fig, path)


def render_scaling(rows, build_slope, solve_slope, path) -> None:
    """Build and solve flops against total node count, log-log."""
    n = np.array([r[1] for r in rows], dtype=float)
    fb = np.array([r[3] for r in rows], dtype=float)
    fs = np.array([r[4] for r in rows], dtype=float)
    fig, ax = _new_axes("flop scaling", "total edge nodes N", "flops")
    ax.loglog(n, fb, "o-", label=f"build (slope {build_slope:.2f})")
    ax.loglog(n, fs, "s-", label=f"solve (slope {solve_slope:.2f})")
    ax.loglog(n, fb[0] * (n / n[0]) ** 1.5, "k--", alpha=0.5, label="N^1.5")
    ax.loglog(n, fs[0] * (n / n[0]), "k:", alpha=0.5, label="N")
    ax.legend()
    _save(fig, path)


def render_ranks(rows, path) -> None:
    """Ranks of off-diagonal root blocks per cutoff, with the half-dim line."""
    labels = [r["block"] for r in rows]
    x = np.arange(len(labels))
    fig, ax = _new_axes("off-diagonal block ranks of the root operator", "", "rank")
    for cut, marker in (("rank@1e-06", "o"), ("rank@1e-08", "s"), ("rank@1e-10", "^")):
        ax.plot(x, [r[cut] for r in rows], marker, label=cut.split("@")[1])
    ax.plot(x, [0.5 * r["dim"] for r in rows], "k--", alpha=0.6, label="dim / 2")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=60, fontsize=7)
    ax.legend(title="cutoff")
    _save(fig, path)


def render_verify(rows, path) -> None:
    """Bar chart of check residuals against their thresholds."""
    labels = [f"{r[0]}:{r[1]}" for r in rows]
    vals = [max(float(r[2]), 1e-17) for r in rows]
    ths = [float(r[3]) for r in rows]
    x = np.arange(len(labels))
    fig, ax = _new_axes("verification checks", "", "residual")
    ax.set_yscale("log")
    colors = ["tab:green" if r[4] == "pass" else "tab:red" for r in rows]
    ax.bar(x, vals, color=colors)
    ax.plot(x, ths, "k_", markersize=14, label="threshold")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=60, fontsize=7, ha="right")
    ax.legend()
    _save(fig, path)
