"""SVG figures: Γ with the support, G_λ per component, the schedule, phase portraits."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# reproducible SVG output: fixed ids, no timestamp
matplotlib.rcParams.update({
    "svg.hashsalt": "limitsets",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.6,
})
_META = {"Date": None, "Creator": None}
_CYCLE_COLORS = ["#1b6ca8", "#d1495b", "#2e8b57", "#edae49", "#6a4c93", "#00798c",
                 "#8d6a9f", "#c9753d"]


def _frame(ax, half: float, R: float):
    ax.set_xlim(-half, half)
    ax.set_ylim(-half, half)
    ax.set_aspect("equal")
    th = np.linspace(0, 2 * np.pi, 721)
    ax.plot(R * np.cos(th), R * np.sin(th), color="0.55", lw=0.6, ls="--", zorder=1)
    ax.tick_params(direction="in", length=2.5)


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_META, bbox_inches="tight")
    plt.close(fig)
    return path


def _draw_gamma(ax, gamma, **kw):
    style = {"color": "black", "lw": 0.9, "zorder": 3}
    style.update(kw)
    for arc in gamma.arcs:
        ax.plot(arc[:, 0], arc[:, 1], **style)
    if gamma.singular_points:
        s = np.array(gamma.singular_points)
        ax.plot(s[:, 0], s[:, 1], "o", ms=2.2, color=style["color"], zorder=4)


def render_support(path: Path, gamma, support, plan) -> Path:
    """Γ over the support labels, with the adjacency tree and the gluing points."""
    dec = support.decomposition
    lat = dec.lattice
    R = math.sqrt(dec.R2)
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    lab = np.ma.masked_less(support.labels.T.astype(float), 0)
    ext = [lat.lo, lat.lo + lat.h * (lat.n - 1)] * 2
    ax.imshow(lab, origin="lower", extent=ext, cmap="Pastel1", interpolation="nearest",
              vmin=0, vmax=max(8, len(support.I)), zorder=0)
    _frame(ax, -lat.lo, R)
    _draw_gamma(ax, gamma)
    for e in plan.E:
        x, y = plan.points[e]
        ax.plot([x], [y], marker="D", ms=4, color="#d1495b", zorder=5)
        ax.annotate(f"{e[0]}-{e[1]}", (x, y), textcoords="offset points", xytext=(4, 4),
                    fontsize=7, color="#d1495b")
    ax.set_title(f"support: {len(support.I)} regions, tree edges {len(plan.E)}")
    return _save(fig, path)


def render_levelset(path: Path, trace, gamma=None, gluing=(), R: float | None = None,
                    title: str | None = None) -> Path:
    half = trace.window
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    _frame(ax, half, R if R is not None else half / 2)
    if gamma is not None:
        _draw_gamma(ax, gamma, color="0.25", lw=0.5, zorder=2)
    for pl, c in zip(trace.polylines, trace.component_labels):
        ax.plot(pl[:, 0], pl[:, 1], color=_CYCLE_COLORS[int(c) % len(_CYCLE_COLORS)],
                lw=1.0, zorder=3)
    for x, y in gluing:
        ax.plot([float(x)], [float(y)], marker="x", ms=4, color="black", zorder=5)
    ax.set_title(title or f"G at lambda = {trace.lam:g}: {trace.n_components} component(s)")
    return _save(fig, path)


def render_schedule(path: Path, table) -> Path:
    rows = [r for r in table.rows if not r.empty]
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    lam = [r.lam for r in rows]
    ax.loglog(lam, [r.d_hausdorff for r in rows], "o-", color="#1b6ca8", lw=1, ms=3,
              label="d_H(G, Gamma)")
    ax.loglog(lam, [r.d_gamma_to_trace for r in rows], "s--", color="#d1495b", lw=0.8, ms=2.5,
              label="sup over Gamma")
    ax.set_xlabel("lambda")
    ax.set_ylabel("distance")
    ax.invert_xaxis()
    ax.legend(frameon=False, fontsize=7)
    ax.grid(True, which="both", lw=0.3, color="0.85")
    return _save(fig, path)


def render_portrait(path: Path, trace, cycles, orbits=(), R: float | None = None) -> Path:
    half = trace.window
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    _frame(ax, half, R if R is not None else half / 2)
    for pl in trace.polylines:
        ax.plot(pl[:, 0], pl[:, 1], color="0.75", lw=2.2, zorder=2)
    for k, c in enumerate(cycles):
        o = c.orbit
        ax.plot(o[:, 0], o[:, 1], color=_CYCLE_COLORS[k % len(_CYCLE_COLORS)], lw=0.9, zorder=3)
        ax.plot([c.landing[0]], [c.landing[1]], "o", ms=2.5, color="black", zorder=4)
    for tr in orbits:
        ax.plot(tr.xy[:, 0], tr.xy[:, 1], color="0.35", lw=0.5, zorder=2)
    ax.set_title(f"{len(cycles)} cycle(s) at lambda = {trace.lam:g}")
    return _save(fig, path)
