"""Figures written next to the CLI's tabular output (Agg backend, no pyplot state)."""

from __future__ import annotations

import math

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_RC = {"figsize": (6.4, 4.0), "dpi": 120}


def _figure(nrows=1, ncols=1, **kw):
    fig = Figure(figsize=kw.pop("figsize", _RC["figsize"]), dpi=_RC["dpi"])
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    for ax in axes.flat:
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    return fig, axes


def _save(fig, path):
    fig.tight_layout()
    # no timestamp in the metadata, so reruns are byte-identical
    fig.savefig(path, metadata={"Software": None})


def shade_bands(ax, K, **kw):
    for b in K.bands:
        ax.axvspan(b.lo, b.hi, color=kw.get("color", "0.9"), zorder=0, lw=0)


def plot_xi(xi, path, samples=None, K=None):
    """Step function xi, optionally over the raw phase samples (t, phase)."""
    fig, ax = _figure()
    ax = ax[0, 0]
    if K is not None:
        shade_bands(ax, K)
    xs, ys = [], []
    for lo, hi, v in xi.pieces:
        xs += [lo, hi]
        ys += [v, v]
    ax.plot(xs, ys, color="C0", lw=1.5, label=r"$\xi$")
    if samples is not None:
        t, ph = samples
        ax.plot(t, ph, ".", ms=2, color="C1", label=r"$\arg h/\pi$")
        ax.legend(frameon=False)
    ax.set_xlim(-xi.radius, xi.radius)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("t")
    _save(fig, path)


def plot_coefficients(J, path):
    lo, hi = J.n_min, J.n_max
    n = np.arange(lo, hi + 1)
    fig, ax = _figure()
    ax = ax[0, 0]
    ax.plot(n[:-1] if not J.is_periodic else n, J.a, "o-", ms=3, lw=0.8, label="a(n)")
    ax.plot(n, J.b, "s-", ms=3, lw=0.8, label="b(n)")
    ax.set_xlabel("n")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_measure(m, path, K=None):
    fig, ax = _figure()
    ax = ax[0, 0]
    if K is not None:
        shade_bands(ax, K)
    for b in m.ac_bands:
        ax.plot(b.nodes, b.density, color="C0", lw=1)
    for x, w in m.atoms:
        ax.vlines(x, 0, w, color="C3", lw=1.5)
    ax.set_xlabel("t")
    _save(fig, path)


def plot_stages(rows, path):
    """Per-stage diagnostics of the approximation pipeline on log axes."""
    fig, ax = _figure()
    ax = ax[0, 0]
    k = np.arange(1, len(rows) + 1)
    for key, label in (("d_J", r"$d(J_n,J)$"), ("symmdiff_PB", r"$|P_n\Delta B|$"), ("weak_star_nu_plus", r"$D(\nu_{n,+},\nu_+)$")):
        vals = [r[key] for r in rows]
        if all(v > 0 and math.isfinite(v) for v in vals):
            ax.semilogy(k, vals, "o-", label=label)
    ax.set_xticks(k)
    ax.set_xlabel("stage")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_toda(traj, path):
    fig, axes = _figure(2, 1, figsize=(6.4, 5.6))
    for j in range(traj.a.shape[1]):
        axes[0, 0].plot(traj.times, traj.a[:, j], lw=1, label=f"a({j})")
        axes[1, 0].plot(traj.times, traj.b[:, j], lw=1, label=f"b({j})")
    axes[0, 0].legend(frameon=False, fontsize=8)
    axes[1, 0].legend(frameon=False, fontsize=8)
    axes[1, 0].set_xlabel("t")
    _save(fig, path)


def plot_torus(K, zs, path):
    fig, ax = _figure(figsize=(4.0, 4.0))
    ax = ax[0, 0]
    th = np.linspace(0, 2 * np.pi, 400)
    ax.plot(np.cos(th), np.sin(th), color="0.7", lw=1)
    for j, z in enumerate(zs):
        ax.plot(z.real, z.imag, "o", label=f"gap {j}")
    ax.set_aspect("equal")
    if zs:
        ax.legend(frameon=False, fontsize=8)
    _save(fig, path)
