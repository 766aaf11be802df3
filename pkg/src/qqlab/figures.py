"""Deterministic figure rendering for density-matrix bar data.

SVG output is byte-reproducible: the matplotlib hash salt is pinned and the
creation-date metadata is stripped, so two renders of the same figure data
compare equal. The default style is a flat annotated heat grid; a 3D bar
style is available for the traditional NMR look.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .tomography import BarFigure

_SVG_HASHSALT = "qqlab"

_STYLES = ("grid", "bars3d")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = _SVG_HASHSALT
    return plt


def render_figure_svg(
    fig_data: BarFigure, path: str | Path, title: str = "", style: str = "grid"
) -> Path:
    """Render one BarFigure to an SVG file and return the path."""
    if style not in _STYLES:
        raise ValueError(f"style must be one of {_STYLES}, got {style!r}")
    plt = _pyplot()
    d = fig_data.re.shape[0]
    span = max(1e-12, float(np.abs(fig_data.re).max()), float(np.abs(fig_data.im).max()))

    if style == "grid":
        fig, axes = plt.subplots(1, 2, figsize=(2.4 * d / 2 + 3.0, 0.62 * d + 1.6))
        for ax, grid, part in zip(axes, (fig_data.re, fig_data.im), ("Re", "Im")):
            ax.imshow(grid, cmap="RdBu_r", vmin=-span, vmax=span)
            ax.set_xticks(range(d), fig_data.labels)
            ax.set_yticks(range(d), fig_data.labels)
            ax.set_title(part)
            for i in range(d):
                for j in range(d):
                    ax.text(
                        j,
                        i,
                        f"{grid[i, j]:+.2f}",
                        ha="center",
                        va="center",
                        fontsize=7,
                    )
    else:
        from mpl_toolkits.mplot3d import Axes3D  # noqa: F401  (register proj)

        fig = plt.figure(figsize=(2.6 * d / 2 + 4.0, 0.8 * d + 2.4))
        xs, ys = np.meshgrid(np.arange(d), np.arange(d))
        xs = xs.ravel()
        ys = ys.ravel()
        for idx, (grid, part) in enumerate(
            ((fig_data.re, "Re"), (fig_data.im, "Im")), start=1
        ):
            ax = fig.add_subplot(1, 2, idx, projection="3d")
            top = grid.ravel()
            ax.bar3d(xs - 0.35, ys - 0.35, np.zeros_like(top), 0.7, 0.7, top, shade=True)
            ax.set_zlim(-span, span)
            ax.set_xticks(range(d))
            ax.set_xticklabels(fig_data.labels, fontsize=7)
            ax.set_yticks(range(d))
            ax.set_yticklabels(fig_data.labels, fontsize=7)
            ax.set_title(part)

    if title:
        fig.suptitle(title)
    if style == "grid":
        fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_figure_csv(fig_data: BarFigure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(fig_data.to_csv())
    return path
