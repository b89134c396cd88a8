"""Static SVG plots. Output is deterministic: fixed hash salt, no date metadata."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

plt.rcParams["svg.hashsalt"] = "geoqkd"
plt.rcParams["svg.fonttype"] = "none"


def line_plot(path, series, xlabel: str, ylabel: str, title: str = "", logx: bool = False,
              logy: bool = False):
    """``series`` is a list of ``(label, x, y)``."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, x, y in series:
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
