"""Learning-curve figures rendered alongside the CSV exports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .engine import LearningCurve


def plot_learning_curves(curves: dict, out_path, title: str = "Learning curves") -> Path:
    """Mean accuracy vs labeled count with a +-1 std band per labelled curve.

    ``curves`` maps a legend label (e.g. the strategy name) to a
    LearningCurve; per-seed traces are drawn faintly behind the mean.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, curve in curves.items():
        rows = curve.aggregate()
        labeled = np.array([r[1] for r in rows])
        mean = np.array([r[2] for r in rows])
        std = np.array([r[3] for r in rows])
        (line,) = ax.plot(labeled, mean, marker="o", markersize=3, label=label)
        ax.fill_between(labeled, mean - std, mean + std, alpha=0.15, color=line.get_color())
        for records in curve.per_seed.values():
            ax.plot(
                [r.labeled for r in records],
                [r.accuracy for r in records],
                color=line.get_color(),
                alpha=0.12,
                linewidth=0.7,
            )
    ax.set_xlabel("labeled samples")
    ax.set_ylabel("test accuracy")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
