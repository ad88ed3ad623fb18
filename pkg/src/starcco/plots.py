"""Static SVG charts. Output bytes are reproducible: no timestamps, fixed hash salt."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "starcco", "svg.fonttype": "path", "font.size": 9}
_META = {"Date": None, "Creator": None}
_LABELS = {"ns": "number of STAR-RISs $N_s$", "k": "elements per STAR-RIS $K$", "none": "cell"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def sweep_figure(summary: list[dict], metric: str):
    """Line chart of ``metric`` (``cov`` or ``cap``) against the sweep value, one series per strategy."""
    var = summary[0].get("sweep_variable", "none")
    strategies = sorted({s["strategy"] for s in summary}, key=lambda s: (s != "mgda", s))
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    for strat in strategies:
        rows = sorted((s for s in summary if s["strategy"] == strat), key=lambda s: s["sweep_value"])
        x = np.array([r["sweep_value"] for r in rows])
        y = np.array([r[f"{metric}_mean"] for r in rows])
        e = np.array([r[f"{metric}_std"] for r in rows])
        ax.errorbar(x, y, yerr=e, marker="o", capsize=3, label=strat)
    ax.set_xlabel(_LABELS.get(var, var))
    ax.set_ylabel("coverage" if metric == "cov" else "capacity (bits/s/Hz)")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def render_plots(summary: list[dict], output_dir: str | Path) -> list[Path]:
    """Coverage-vs-value and capacity-vs-value charts with std error bars."""
    if not summary:
        raise ValueError("empty summary: nothing to plot")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    var = summary[0].get("sweep_variable", "none")
    written = []
    for metric, stem in (("cov", "coverage"), ("cap", "capacity")):
        with plt.rc_context(_RC):
            path = out / f"{stem}_vs_{var}.svg"
            _save(sweep_figure(summary, metric), path)
        written.append(path)
    return written


def render_heatmap(scene, values: np.ndarray, path: str | Path, label: str = "RSRP (dBm)") -> Path:
    n = scene.config.grid_side
    grid = np.asarray(values, dtype=float).reshape(n, n)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        R = scene.config.R_s
        im = ax.imshow(grid, origin="lower", extent=(0, R, 0, R), cmap="viridis")
        ax.scatter(scene.ris_positions[:, 0], scene.ris_positions[:, 1], marker="s", c="w",
                   edgecolors="k", label="STAR-RIS")
        ax.scatter(scene.bs_positions[:, 0], scene.bs_positions[:, 1], marker="^", c="r", label="BS")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        fig.colorbar(im, ax=ax, label=label)
        ax.legend(loc="upper left", fontsize=7)
        fig.tight_layout()
        _save(fig, Path(path))
    return Path(path)
