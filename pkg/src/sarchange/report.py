"""Figure rendering for run artifacts.

Every function writes a PNG next to the delimited text outputs. Figures are
inspection aids; nothing downstream reads them back, and determinism
guarantees cover only the text and binary artifacts.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalmap import ChangeMap
from .imagery import DifferenceImage
from .preclassify import TriMap
from .trainer import TrainReport

__all__ = ["save_loss_curve", "save_map_panel", "save_sweep_curve"]


def save_loss_curve(report: TrainReport, path) -> None:
    """Plot mean loss and training accuracy per epoch."""
    epochs = [e.epoch for e in report.epochs]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [e.mean_loss for e in report.epochs], color="tab:blue",
            marker="o", markersize=3, label="mean loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss", color="tab:blue")
    twin = ax.twinx()
    twin.plot(epochs, [e.accuracy for e in report.epochs], color="tab:orange",
              marker="s", markersize=3, label="accuracy")
    twin.set_ylabel("training accuracy", color="tab:orange")
    twin.set_ylim(0.0, 1.02)
    ax.set_title("training progress")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_map_panel(path, di: DifferenceImage | None = None,
                   trimap: TriMap | None = None,
                   changemap: ChangeMap | None = None,
                   overlay: np.ndarray | None = None) -> None:
    """Render the available pipeline stages side by side as gray images."""
    panels = [(name, img) for name, img in (
        ("difference image", None if di is None else di.values),
        ("preclassification", None if trimap is None else trimap.labels),
        ("change map", None if changemap is None else changemap.bits),
        ("agreement overlay", overlay),
    ) if img is not None]
    if not panels:
        raise ValueError("nothing to render")
    fig, axes = plt.subplots(1, len(panels), figsize=(3.2 * len(panels), 3.4))
    if len(panels) == 1:
        axes = [axes]
    for ax, (name, img) in zip(axes, panels):
        ax.imshow(np.asarray(img, dtype=np.float64), cmap="gray",
                  interpolation="nearest")
        ax.set_title(name, fontsize=9)
        ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_sweep_curve(rows, path) -> None:
    """Plot PCC and KC against patch size from `(r, pcc, kc)` rows."""
    if not rows:
        raise ValueError("no sweep rows to plot")
    rs = [row[0] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rs, [row[1] for row in rows], color="tab:blue", marker="o",
            label="PCC")
    ax.plot(rs, [row[2] for row in rows], color="tab:orange", marker="s",
            label="KC")
    ax.set_xlabel("patch size r")
    ax.set_ylabel("percent")
    ax.set_xticks(rs)
    ax.set_title("patch size sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
