"""Figure rendering for benchmark runs: ratio-vs-bound bars and a
curvature scatter.  Kept separate from the CLI so headless environments
only pay for matplotlib when figures are requested.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def ratio_bound_figure(rows, path) -> str:
    """Grouped bars: achieved value/OPT next to the two theoretical bounds.

    rows: dicts with instance, algorithm, ratio, bound_gamma, bound_curvature.
    Rows without a ratio (OPT not computed) are dropped.
    """
    rows = [r for r in rows if r.get("ratio") is not None]
    labels = []
    ratios = []
    bg = []
    bc = []
    for r in rows:
        labels.append(f"{r['instance']}\n{r['algorithm']}")
        ratios.append(r["ratio"])
        bg.append(r.get("bound_gamma"))
        bc.append(r.get("bound_curvature"))
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(labels)), 4.5))
    pos = range(len(labels))
    ax.bar([p - 0.2 for p in pos], ratios, width=0.2, label="value / OPT")
    ax.bar(pos, [v if v is not None else 0 for v in bg], width=0.2,
           label="1 - gamma_h/e - eps")
    ax.bar([p + 0.2 for p in pos], [v if v is not None else 0 for v in bc],
           width=0.2, label="1 - c/e - eps")
    ax.set_xticks(list(pos))
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("ratio")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title("achieved ratio vs guarantees")
    fig.tight_layout()
    out = str(Path(path))
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def curvature_scatter_figure(rows, path) -> str:
    """gamma_h against total curvature c, one point per instance; the
    diagonal marks the trivial decomposition's worst case."""
    pts = [(r["c"], r["gamma_h"]) for r in rows
           if r.get("c") is not None and r.get("gamma_h") is not None]
    fig, ax = plt.subplots(figsize=(5, 5))
    if pts:
        xs, ys = zip(*pts)
        ax.scatter(xs, ys, s=24)
    ax.plot([0, 1], [0, 1], linestyle="--", linewidth=1, color="gray")
    ax.set_xlabel("total curvature c")
    ax.set_ylabel("gamma_h")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("decomposition curvature vs total curvature")
    fig.tight_layout()
    out = str(Path(path))
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
