"""SVG line plots for CLI outputs.

Plots are a convenience and are rendered deterministically: no timestamp
metadata and a fixed hash salt for element ids.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def line_plot(path, x, series: dict, *, xlabel: str, ylabel: str = "", title: str = "") -> None:
    """Write one panel with a line per entry of ``series`` to ``path``."""
    with plt.rc_context({"svg.hashsalt": "qheat", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, y in series.items():
            ax.plot(x, y, label=label, lw=1.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
