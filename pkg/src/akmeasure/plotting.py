"""Report figures.  Everything renders off-screen with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["STYLE", "save_figure", "plot_evolution", "plot_distribution", "plot_samples", "plot_sweep"]

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0

STYLE = {
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "lines.linewidth": 1.2,
    "image.cmap": "viridis",
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def save_figure(fig, path) -> Path:
    # no Software/date chunk so identical data gives identical PNG bytes
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_evolution(t, varQ1, varQ2, bound, path) -> Path:
    t = np.asarray(t)
    prod = np.sqrt(np.asarray(varQ1) * np.asarray(varQ2))
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(fig_width * 1.6, fig_width * golden_mean))
        a1.plot(t, varQ1, label=r"$\Delta Q_1^2$")
        a1.plot(t, varQ2, "--", label=r"$\Delta Q_2^2$")
        a1.set_xlabel("t")
        a1.set_ylabel("pointer variance")
        a1.legend()
        a2.plot(t, prod, label=r"$\Delta Q_1 \Delta Q_2$")
        a2.plot(t, bound, ":", color="k", label="lower bound")
        a2.set_xlabel("t")
        a2.legend()
        fig.tight_layout()
    return save_figure(fig, path)


def plot_distribution(Q1, Q2, P, path) -> Path:
    """Heatmap of P(Q1, Q2) with both marginals."""
    Q1, Q2, P = map(np.asarray, (Q1, Q2, P))
    d1, d2 = Q1[1] - Q1[0], Q2[1] - Q2[0]
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(fig_width, fig_width))
        gs = fig.add_gridspec(2, 2, width_ratios=(4, 1), height_ratios=(1, 4), hspace=0.05, wspace=0.05)
        ax = fig.add_subplot(gs[1, 0])
        top = fig.add_subplot(gs[0, 0], sharex=ax)
        side = fig.add_subplot(gs[1, 1], sharey=ax)
        ax.pcolormesh(Q1, Q2, P.T, shading="nearest")
        ax.set_xlabel(r"$Q_1$")
        ax.set_ylabel(r"$Q_2$")
        top.plot(Q1, P.sum(axis=1) * d2)
        side.plot(P.sum(axis=0) * d1, Q2)
        top.tick_params(labelbottom=False)
        side.tick_params(labelleft=False)
    return save_figure(fig, path)


def plot_samples(pairs, path, bins: int = 80) -> Path:
    pairs = np.asarray(pairs)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(fig_width, fig_width))
        ax.hist2d(pairs[:, 0], pairs[:, 1], bins=bins)
        ax.set_xlabel(r"$Q_1$")
        ax.set_ylabel(r"$Q_2$")
        ax.set_title(f"N = {len(pairs)}")
    return save_figure(fig, path)


def plot_sweep(strengths, se, predicted, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(strengths, se, "o", label="measured")
        ax.plot(strengths, predicted, "-", label="predicted")
        ax.set_xlabel("stage-1 strength")
        ax.set_ylabel(r"SE of $\hat p_0$")
        ax.legend()
    return save_figure(fig, path)
