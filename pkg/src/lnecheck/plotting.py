"""SVG figures for reports; output is byte-stable for identical inputs."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "svg.hashsalt": "lnecheck",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    with plt.rc_context(_STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def plot_ladder(ladder, path, title: str = "", xlabel: str = "radius") -> Path:
    """Ratio ladder ``K`` against scale on log-log axes."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        xs = [s for s, _ in ladder]
        ks = [k for _, k in ladder]
        finite = [(x, k) for x, k in zip(xs, ks) if math.isfinite(k)]
        if finite:
            ax.plot(*zip(*finite), "o-", color="tab:blue", lw=1.2, ms=4)
        for x, k in zip(xs, ks):
            if not math.isfinite(k):
                ax.axvline(x, color="tab:red", lw=0.8, ls="--")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("K")
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return _save(fig, path)


def _azimuthal(y: np.ndarray) -> np.ndarray:
    """Azimuthal equidistant view of S^2 centered at the north pole."""
    theta = np.arccos(np.clip(y[:, 2], -1.0, 1.0))
    phi = np.arctan2(y[:, 1], y[:, 0])
    return np.column_stack([theta * np.cos(phi), theta * np.sin(phi)])


def plot_compactification(points: np.ndarray, sphere_points: np.ndarray, path, title: str = "") -> Path:
    """Plane view and sphere view (seen from the north pole) side by side."""
    with plt.rc_context(_STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=(7.5, 3.6))
        a.plot(points[:, 0], points[:, 1], ".", ms=1.0, color="tab:blue")
        a.set_aspect("equal", adjustable="datalim")
        a.set_title("plane")
        v = _azimuthal(sphere_points)
        b.plot(v[:, 0], v[:, 1], ".", ms=1.0, color="tab:blue")
        b.plot([0.0], [0.0], "*", ms=8, color="tab:red", label="north pole")
        circle = np.linspace(0, 2 * np.pi, 200)
        b.plot(np.pi * np.cos(circle), np.pi * np.sin(circle), lw=0.5, color="0.6")
        b.set_aspect("equal")
        b.set_title("sphere")
        b.legend(loc="lower right", frameon=False)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
    return _save(fig, path)


def plot_links(rows, path, title: str = "") -> Path:
    """Largest component link constant per rung."""
    ladder = [(r.radius, r.worst) for r in rows]
    return plot_ladder(ladder, path, title, xlabel="link radius")
