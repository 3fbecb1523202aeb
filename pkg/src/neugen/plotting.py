"""Matplotlib figures written next to the delimited reports.

Uses the object-oriented ``Figure`` API with the Agg canvas only, so no
pyplot state is touched and figures can be rendered from worker threads.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .imagecore import ImageF
from .pipeline import EvalReport, SweepRow

ORIGINAL_COLOR = "#e0a800"
NEUGEN_COLOR = "#6a3d9a"
DPI = 120


def _new_figure(width=8.0, height=None, ncols=1):
    height = height or width * (np.sqrt(5) - 1) / 2 / max(ncols, 1) * 1.4
    fig = Figure(figsize=(width, height), facecolor="w")
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, ncols)
    return fig, np.atleast_1d(axes)


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    return path


def plot_effect(report: EvalReport, path) -> Path:
    """Per-scene class SSIM and mean match counts, original vs NeuGen."""
    scenes = report.scenes
    x = np.arange(len(scenes))
    fig, (ax_s, ax_m) = _new_figure(10, ncols=2)
    for variant, color in (("original", ORIGINAL_COLOR), ("neugen", NEUGEN_COLOR)):
        vals = [report.value(s, "class_ssim", variant) for s in scenes]
        ax_s.plot(x, vals, "o-", color=color, label=variant)
    ax_s.set_xticks(x, scenes, rotation=45, ha="right")
    ax_s.set_ylabel("class SSIM (first vs rest)")
    ax_s.legend(frameon=False)

    width = 0.38
    for shift, variant, color in ((-width / 2, "original", ORIGINAL_COLOR),
                                  (width / 2, "neugen", NEUGEN_COLOR)):
        vals = [report.value(s, "mean_matches", variant) for s in scenes]
        ax_m.bar(x + shift, vals, width, color=color, label=variant)
    ax_m.set_xticks(x, scenes, rotation=45, ha="right")
    ax_m.set_ylabel("mean feature matches (adjacent pairs)")
    return _save(fig, path)


def plot_sweep(rows: Sequence[SweepRow], path) -> Path:
    """Fidelity SSIM and match delta against fusion weight."""
    weights = [r.weight for r in rows]
    fidelity = [np.mean(list(r.class_ssim.values())) if r.class_ssim else np.nan for r in rows]
    deltas = [r.mean_match_delta for r in rows]
    fig, (ax,) = _new_figure(7)
    ax.plot(weights, fidelity, "o-", color=NEUGEN_COLOR)
    ax.set_xlabel("fusion weight")
    ax.set_ylabel("SSIM(original, enhanced)", color=NEUGEN_COLOR)
    twin = ax.twinx()
    twin.plot(weights, deltas, "s--", color=ORIGINAL_COLOR)
    twin.set_ylabel("mean match delta", color=ORIGINAL_COLOR)
    twin.axhline(0.0, color="0.7", lw=0.8)
    return _save(fig, path)


def plot_images(images: Sequence[ImageF], titles: Sequence[str], path) -> Path:
    fig, axes = _new_figure(3.0 * len(images), 3.4, ncols=len(images))
    for ax, img, title in zip(axes, images, titles):
        data = img.data[:, :, 0] if img.channels == 1 else img.data
        ax.imshow(np.clip(data, 0, 1), cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.set_axis_off()
    return _save(fig, path)


def plot_convergence(samples: Sequence[int], deltas: Sequence[float], path) -> Path:
    fig, (ax,) = _new_figure(6)
    ax.loglog(samples, deltas, "o-", color=NEUGEN_COLOR)
    ax.set_xlabel("samples per ray")
    ax.set_ylabel("max |change| after doubling")
    return _save(fig, path)
