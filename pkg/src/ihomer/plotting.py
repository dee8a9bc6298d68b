"""Figures written next to the delimited benchmark outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_rolling(path, series, window: int, title: str = "", events=()) -> None:
    """Rolling sample accuracy; ``events`` are (instance, label) pairs drawn as markers."""
    series = np.asarray(series, dtype=float)
    fig, ax = plt.subplots(figsize=(8, 3.5))
    x = np.arange(len(series)) + window - 1
    ax.plot(x, series, lw=1.2, color="tab:blue")
    seen = set()
    for at, label in events:
        style = {"swap": ("tab:red", "-"), "spawn_alt": ("tab:orange", ":")}.get(label)
        if style is None:
            continue
        ax.axvline(at, color=style[0], ls=style[1], lw=0.8, label=None if label in seen else label)
        seen.add(label)
    if seen:
        ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel("instance")
    ax.set_ylabel(f"sample accuracy (window {window})")
    ax.set_ylim(0.0, 1.02)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_comparison(path, metrics: list[str], runs: list[str], values) -> None:
    """Grouped bars: one group per metric, one bar per run."""
    values = np.asarray(values, dtype=float)  # shape (runs, metrics)
    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(metrics) * max(1, len(runs)) / 2), 3.8))
    width = 0.8 / max(len(runs), 1)
    base = np.arange(len(metrics))
    for r, name in enumerate(runs):
        ax.bar(base + r * width - 0.4 + width / 2, values[r], width, label=name)
    ax.set_xticks(base)
    ax.set_xticklabels(metrics, rotation=15)
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=7, ncol=2)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
