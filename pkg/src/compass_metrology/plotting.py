"""Static figures for CLI reports.

Uses the object-oriented Figure API with the Agg canvas, so nothing here
touches pyplot's global state or needs a display.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.colors import TwoSlopeNorm
from matplotlib.figure import Figure

from .wigner import WignerGrid

DPI = 150


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    return path


def _clean(ax) -> None:
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)


def plot_scan(columns: Mapping[str, np.ndarray], path: str | Path, s_o: float | None = None, title: str = "") -> Path:
    """Fidelity and detection probability against displacement s."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    s = np.asarray(columns["s"])
    styles = {
        "f_exact": dict(color="k", lw=1.8, label="f(s)"),
        "f_approx": dict(color="k", ls="--", lw=1.2, label="f(s), small-s form"),
        "P_g_closed": dict(color="C0", lw=1.4, label=r"$P_g$ closed form"),
        "P_g_sim": dict(color="C3", ls=":", lw=1.8, label=r"$P_g$ simulated"),
    }
    for name, kw in styles.items():
        if name in columns:
            ax.plot(s, columns[name], **kw)
    if s_o is not None:
        ax.axvline(s_o, color="0.5", lw=0.8)
        ax.annotate(r"$s_o$", (s_o, 1.0), textcoords="offset points", xytext=(3, -12), color="0.4")
    ax.set_xlabel("s")
    ax.set_ylim(-0.02, 1.05)
    ax.set_xlim(s[0], s[-1])
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    _clean(ax)
    return _save(fig, path)


def _extent(w: WignerGrid):
    return (*w.x_range, *w.y_range)


def plot_wigner(w: WignerGrid, path: str | Path, title: str = "", values: np.ndarray | None = None, label: str = "W") -> Path:
    """Heat map on the alpha plane with a diverging map centred on zero."""
    v = w.values if values is None else values
    lim = float(np.max(np.abs(v))) or 1.0
    fig = Figure(figsize=(5, 4.3))
    ax = fig.add_subplot()
    im = ax.imshow(
        v,
        origin="lower",
        extent=_extent(w),
        cmap="RdBu_r",
        norm=TwoSlopeNorm(0.0, -lim, lim),
        interpolation="nearest",
    )
    fig.colorbar(im, ax=ax, label=label, shrink=0.9)
    ax.set_xlabel(r"Re $\alpha$")
    ax.set_ylabel(r"Im $\alpha$")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_product(w1: WignerGrid, w2: WignerGrid, path: str | Path, title: str = "") -> Path:
    """pi W1 W2, whose integral is the overlap of the two states."""
    return plot_wigner(w1, path, title=title, values=math.pi * w1.values * w2.values, label=r"$\pi W_1 W_2$")


def plot_estimates(estimates: np.ndarray, s_true: float, delta: float, path: str | Path, title: str = "") -> Path:
    """Histogram of Monte Carlo estimates against the Gaussian limit."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.hist(estimates, bins=40, density=True, color="0.75", edgecolor="0.4", lw=0.5)
    x = np.linspace(s_true - 4 * delta, s_true + 4 * delta, 400)
    ax.plot(x, np.exp(-((x - s_true) ** 2) / (2 * delta**2)) / math.sqrt(2 * math.pi * delta**2), "C3", lw=1.5)
    ax.axvline(s_true, color="k", lw=0.8)
    ax.set_xlabel(r"$\tilde s$")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    _clean(ax)
    return _save(fig, path)


def plot_engineered(n: np.ndarray, exact: np.ndarray, poly: np.ndarray, path: str | Path, title: str = "") -> Path:
    """Engineered operator function against its truncated polynomial."""
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.plot(n, exact, "o", color="k", ms=4, label="sum of drives")
    ax.plot(n, poly, "-", color="C0", lw=1.2, label="truncated polynomial")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$f^{(e)}(n)$")
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    _clean(ax)
    return _save(fig, path)
