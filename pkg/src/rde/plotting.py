"""Figures for the CLI reports (matplotlib, Agg backend, PNG files)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_profiles(profiles, path, title="", xlim=None):
    """Rescaled CDFs at each checkpoint against the limit CDF."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ref_drawn = False
    for n in sorted(profiles):
        y, f, ref = profiles[n]
        ax.step(y, f, where="post", lw=1, label=f"N={n}")
        if not ref_drawn:
            order = np.argsort(y)
            ax.plot(y[order], ref[order], "k--", lw=1.2, label="limit")
            ref_drawn = True
    if xlim:
        ax.set_xlim(*xlim)
    ax.set_xlabel("rescaled value")
    ax.set_ylabel("CDF")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_ks(checkpoints, path, title=""):
    ns = [c[0] for c in checkpoints]
    ks = [c[1] for c in checkpoints]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ns, ks, "o-")
    ax.set_xlabel("N")
    ax.set_ylabel("KS distance")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_remainders(deltas, remainders, path, title=""):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(deltas, remainders, "s-")
    ax.set_xlabel("delta")
    ax.set_ylabel("max |R(delta)|")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_series(x, y, path, xlabel, ylabel, title="", line=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(x, y, ".-", ms=3)
    if line is not None:
        slope, icpt = line
        xs = np.asarray(x, float)
        ax.plot(xs, icpt + slope * xs, "r--", lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


def plot_cdf(x, F, path, title="", ref=None):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.step(x, F, where="post", lw=1, label="F")
    if ref is not None:
        ax.plot(x, ref, "k--", lw=1, label="reference")
        ax.legend(fontsize=8)
    ax.set_xlabel("x")
    ax.set_ylabel("CDF")
    ax.set_title(title)
    return _save(fig, path)
