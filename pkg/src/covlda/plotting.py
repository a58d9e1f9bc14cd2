"""Report figures for a fitted model directory."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC_PARAMS = {
    "axes.spines.right": False,
    "axes.spines.top": False,
    "figure.dpi": 100,
    "font.size": 9,
    "svg.hashsalt": "covlda",
}


def savefig(fig, path, dpi=150):
    fig.savefig(path, dpi=dpi, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def trace_plot(logdens, path, burnin: int = 0):
    with plt.rc_context(RC_PARAMS):
        fig, ax = plt.subplots(figsize=(6, 3))
        it = np.arange(1, len(logdens) + 1)
        ax.plot(it, logdens, lw=0.6, color="tab:blue")
        if 0 < burnin < len(logdens):
            ax.axvline(burnin, color="grey", ls="--", lw=0.8)
        ax.set_xlabel("iteration")
        ax.set_ylabel("log density")
        return savefig(fig, path)


def phi_heatmap(phi, category_names, cluster_names, path, max_categories: int = 60):
    phi = np.asarray(phi)
    # keep the categories with the largest peak weight when there are many
    keep = np.sort(np.argsort(-phi.max(0))[:max_categories])
    with plt.rc_context(RC_PARAMS):
        fig, ax = plt.subplots(figsize=(max(4, 0.15 * keep.size + 2), 0.4 * len(cluster_names) + 1.5))
        im = ax.imshow(phi[:, keep], aspect="auto", cmap="viridis")
        ax.set_yticks(range(len(cluster_names)), cluster_names)
        ax.set_xticks(range(keep.size), [category_names[s] for s in keep], rotation=90, fontsize=6)
        fig.colorbar(im, ax=ax, label="composition")
        return savefig(fig, path)


def beta_interval_plot(rows, path):
    """Posterior means with credible intervals, one panel per cluster.

    ``rows`` are the dict rows of ``beta_summary.csv``.
    """
    clusters = list(dict.fromkeys(r["cluster"] for r in rows))
    with plt.rc_context(RC_PARAMS):
        fig, axes = plt.subplots(1, len(clusters), figsize=(2.4 * len(clusters), 3), sharey=True,
                                 squeeze=False)
        for ax, c in zip(axes[0], clusters):
            sub = [r for r in rows if r["cluster"] == c]
            y = np.arange(len(sub))
            mean = np.array([float(r["mean"]) for r in sub])
            lo = np.array([float(r["ci_lower"]) for r in sub])
            hi = np.array([float(r["ci_upper"]) for r in sub])
            sig = np.array([r["significant"] == "true" for r in sub])
            ax.hlines(y, lo, hi, color="grey")
            ax.scatter(mean, y, c=np.where(sig, "tab:red", "tab:blue"), s=12, zorder=3)
            ax.axvline(0, color="black", lw=0.6)
            ax.set_yticks(y, [r["covariate"] for r in sub])
            ax.set_title(c)
        return savefig(fig, path)


def render_report_figures(model, logdens, out_dir) -> list:
    """Write ``trace.png``, ``phi_heatmap.png`` and ``beta_intervals.png``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    burnin = int(model.meta.get("burnin", 0))
    return [
        trace_plot(logdens, out / "trace.png", burnin),
        phi_heatmap(model.phi_mean, model.category_names, model.cluster_names, out / "phi_heatmap.png"),
        beta_interval_plot(model.beta_rows, out / "beta_intervals.png"),
    ]
