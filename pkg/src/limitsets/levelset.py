"""Tracing G_λ = {H_{λ,α} = 0}, Hausdorff distances, regularity and local probes."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .contour import Lattice, trace_zero_set
from .family import FamilySpec, alpha_candidates
from .poly import PlanarPoly
from .variety import GammaTrace, ceil_sqrt

RESIDUAL_TOL = 1e-10
REGULARITY_TOL = 1e-6
MAX_ALPHA_ATTEMPTS = 8
DEFAULT_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)


class EmptyInput(ValueError):
    pass


class PersistentIrregularity(RuntimeError):
    pass


def residual_tol(lam: float, fn: PlanarPoly | None = None) -> float:
    """1e-10, scaled by max(λ, λ²·‖H‖₁) once λ < 1e-6."""
    if lam >= 1e-6 or fn is None:
        return RESIDUAL_TOL
    return RESIDUAL_TOL * max(lam, lam * lam * fn.norm1())


@dataclass
class LevelSetTrace:
    lam: float
    alpha: Fraction
    polylines: list[np.ndarray]
    residuals: list[np.ndarray]
    component_labels: np.ndarray
    min_grad_norm: float
    bounding_radius: float
    window: float
    cell: float
    tol: float
    resolution: int
    empty: bool = False
    open_ends: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return int(self.component_labels.max()) + 1 if len(self.component_labels) else 0

    def points(self) -> np.ndarray:
        if not self.polylines:
            return np.zeros((0, 2))
        return np.vstack(self.polylines)

    def component_points(self, k: int) -> np.ndarray:
        parts = [p for p, c in zip(self.polylines, self.component_labels) if c == k]
        return np.vstack(parts) if parts else np.zeros((0, 2))

    def max_residual(self) -> float:
        return max((float(r.max()) for r in self.residuals if len(r)), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "abs_H", "component", "polyline"])
        for k, (pl, res, c) in enumerate(zip(self.polylines, self.residuals,
                                             self.component_labels)):
            for (x, y), r in zip(pl, res):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(r)), int(c), k])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "lambda": self.lam, "alpha": str(self.alpha), "empty": self.empty,
            "components": self.n_components, "polylines": len(self.polylines),
            "vertices": int(sum(len(p) for p in self.polylines)),
            "max_abs_H": self.max_residual(), "residual_tol": self.tol,
            "min_grad_norm": self.min_grad_norm, "regularity_tol": REGULARITY_TOL,
            "bounding_radius": self.bounding_radius, "window_radius": self.window,
            "open_ends": self.open_ends, "cell": self.cell,
        }


def planar_H(spec: FamilySpec, lam: float) -> PlanarPoly:
    return PlanarPoly.from_polynomial(spec.H, lam=Fraction(lam))


def trace_levelset(spec: FamilySpec, lam: float, resolution: int = 2048,
                   refine: int = 2) -> LevelSetTrace:
    """Marching squares for H(·,·,λ) = 0 on the square of half-width 2R̂.

    Cells within two cells of a sign change are subdivided ``refine`` times.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if lam < 1e-4 and resolution < 4096:
        warnings.warn(f"lambda = {lam:g} below 1e-4 needs resolution >= 4096", stacklevel=2)
    R_hat = ceil_sqrt(spec.R2)
    window = 2 * R_hat
    lat = Lattice.centered(window, resolution)
    fn = planar_H(spec, lam)
    tol = residual_tol(lam, fn)
    # polish to the float root: stopping at |H| < tol can leave a vertex on a
    # saddle of H whose value is itself below tol
    cs = trace_zero_set(fn, lat, refine=refine, tol=0.0)
    polylines, residuals = [], []
    for pl in cs.polylines():
        polylines.append(pl)
        residuals.append(np.abs(fn(pl[:, 0], pl[:, 1])))
    if cs.vertices.size:
        gx, gy = fn.diff("x"), fn.diff("y")
        v = cs.vertices
        min_grad = float(np.min(np.hypot(gx(v[:, 0], v[:, 1]), gy(v[:, 0], v[:, 1]))))
        bound = float(np.max(np.hypot(v[:, 0], v[:, 1])))
    else:
        min_grad, bound = math.inf, 0.0
    return LevelSetTrace(lam, spec.alpha, polylines, residuals, cs.labels, min_grad, bound,
                         float(window), cs.fine_h, tol, resolution,
                         empty=not polylines, open_ends=cs.open_ends,
                         meta={"refined_cells": cs.refined_cells,
                               "grow_rounds": cs.meta.get("grow_rounds", 0)})


# ---------------------------------------------------------------------------
# Hausdorff distance
# ---------------------------------------------------------------------------

def _as_points(a) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    if len(a) == 0:
        raise EmptyInput("Hausdorff distance needs two nonempty point sets")
    return a


def directed_hausdorff_brute(A, B, chunk: int = 2048) -> float:
    """sup_a inf_b |a - b| by exhaustive pairs (the oracle)."""
    A, B = _as_points(A), _as_points(B)
    worst = 0.0
    for s in range(0, len(A), chunk):
        d = np.hypot(A[s:s + chunk, None, 0] - B[None, :, 0],
                     A[s:s + chunk, None, 1] - B[None, :, 1])
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def directed_hausdorff(A, B) -> float:
    A, B = _as_points(A), _as_points(B)
    d, _ = cKDTree(B).query(A, k=1)
    return float(d.max())


def hausdorff(A, B, method: str = "tree") -> float:
    """max of the two directed distances, exact over the samples."""
    one = directed_hausdorff_brute if method == "brute" else directed_hausdorff
    return max(one(A, B), one(B, A))


# ---------------------------------------------------------------------------
# schedule, regularity
# ---------------------------------------------------------------------------

@dataclass
class ScheduleRow:
    lam: float
    d_hausdorff: float
    d_trace_to_gamma: float
    d_gamma_to_trace: float
    components: int
    min_grad_norm: float
    vertices: int
    empty: bool

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "d_H": self.d_hausdorff,
                "d_trace_to_gamma": self.d_trace_to_gamma,
                "d_gamma_to_trace": self.d_gamma_to_trace,
                "components": self.components, "min_grad_norm": self.min_grad_norm,
                "vertices": self.vertices, "empty": self.empty}


@dataclass
class ScheduleTable:
    rows: list[ScheduleRow]
    traces: list[LevelSetTrace] = field(repr=False, default_factory=list)

    @property
    def strictly_decreasing(self) -> bool:
        d = [r.d_hausdorff for r in self.rows]
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def components_stable(self) -> bool:
        c = [r.components for r in self.rows]
        return len(c) < 2 or c[-1] == c[-2]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows],
                "d_H_strictly_decreasing": self.strictly_decreasing,
                "components_stable": self.components_stable}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_schedule(lams) -> list[float]:
    lams = [float(v) for v in lams]
    if any(v <= 0 for v in lams) or any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda schedule must be positive and strictly decreasing")
    return lams


def convergence_schedule(spec: FamilySpec, lams=DEFAULT_SCHEDULE, resolution: int = 2048,
                         gamma: GammaTrace | np.ndarray | None = None) -> ScheduleTable:
    """One trace per λ with d_H(G_λ, Γ), component count and min |∇H|."""
    from .variety import extract_gamma
    lams = _check_schedule(lams)
    if gamma is None:
        gamma = extract_gamma(spec.f, spec.R2, resolution)
    G = gamma.points() if isinstance(gamma, GammaTrace) else np.asarray(gamma, float)
    rows, traces = [], []
    for lam in lams:
        tr = trace_levelset(spec, lam, resolution)
        traces.append(tr)
        if tr.empty:
            rows.append(ScheduleRow(lam, math.inf, math.inf, math.inf, 0, math.inf, 0, True))
            continue
        P = tr.points()
        a, b = directed_hausdorff(P, G), directed_hausdorff(G, P)
        rows.append(ScheduleRow(lam, max(a, b), a, b, tr.n_components, tr.min_grad_norm,
                                len(P), False))
    return ScheduleTable(rows, traces)


@dataclass
class RegularityResult:
    ok: bool
    failing: list[float]
    alpha_history: list[Fraction]
    min_grad_norms: dict[float, float]
    spec: FamilySpec
    persistent: bool = False

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failing_lambdas": self.failing,
                "alpha_history": [str(a) for a in self.alpha_history],
                "final_alpha": str(self.spec.alpha),
                "min_grad_norms": {repr(k): v for k, v in self.min_grad_norms.items()},
                "tolerance": REGULARITY_TOL, "persistent_irregularity": self.persistent}


def regularity_failures(spec: FamilySpec, lams, resolution: int = 2048,
                        tol: float = REGULARITY_TOL):
    mins = {}
    for lam in lams:
        mins[lam] = trace_levelset(spec, lam, resolution).min_grad_norm
    return [lam for lam, g in mins.items() if not g > tol], mins


def regularity_check(spec: FamilySpec, lams=DEFAULT_SCHEDULE, resolution: int = 2048,
                     seed: int = 0, max_attempts: int = MAX_ALPHA_ATTEMPTS,
                     tol: float = REGULARITY_TOL, strict: bool = False) -> RegularityResult:
    """min |∇H| over traced vertices > tol for every λ, resampling α on failure.

    α starts at ``spec.alpha`` and then walks the seeded candidate order; at
    most ``max_attempts`` values are tried.  A persistent failure is reported
    (or raised with ``strict=True``).
    """
    lams = [float(v) for v in lams]
    candidates = iter(alpha_candidates(seed))
    history = [spec.alpha]
    current = spec
    while True:
        failing, mins = regularity_failures(current, lams, resolution, tol)
        if not failing:
            return RegularityResult(True, [], history, mins, current)
        if len(history) >= max_attempts:
            if strict:
                raise PersistentIrregularity(
                    f"irregular at lambda {failing} for alpha in {[str(a) for a in history]}")
            return RegularityResult(False, failing, history, mins, current, persistent=True)
        alpha = next(a for a in candidates if a not in history)
        history.append(alpha)
        current = current.with_alpha(alpha)


# ---------------------------------------------------------------------------
# component oracle
# ---------------------------------------------------------------------------

def raster_component_count(spec: FamilySpec, lam: float, resolution: int = 4096,
                           band: float = 1.0, block: int = 256) -> int:
    """Connected components of {|H| < band·h·|∇H|} on a pixel grid (8-connected).

    Independent of the contour tracer: it only uses first-order distance
    estimates at pixel centres and an image labelling.
    """
    R_hat = ceil_sqrt(spec.R2)
    lat = Lattice.centered(2 * R_hat, resolution)
    fn = planar_H(spec, lam)
    gx, gy = fn.diff("x"), fn.diff("y")
    xs = lat.coords
    mask = np.zeros((len(xs), len(xs)), dtype=bool)
    for s in range(0, len(xs), block):
        bx = xs[s:s + block]
        V = fn.grid(bx, xs)
        G = np.hypot(gx.grid(bx, xs), gy.grid(bx, xs))
        mask[s:s + block] = np.abs(V) < band * lat.h * G
    _, n = ndimage.label(mask, structure=np.ones((3, 3), bool))
    return int(n)


# ---------------------------------------------------------------------------
# local probes
# ---------------------------------------------------------------------------

class _LogPolar:
    """H in log-polar coordinates about ``p``, reparametrized onto [0, 1]²."""

    def __init__(self, fn: PlanarPoly, p, r_min: float, r_max: float):
        self.fn, self.p = fn, p
        self.u0, self.du = math.log(r_min), math.log(r_max) - math.log(r_min)

    def _xy(self, s, t):
        r = np.exp(self.u0 + self.du * np.asarray(s, float))
        th = 2 * np.pi * np.asarray(t, float)
        return self.p[0] + r * np.cos(th), self.p[1] + r * np.sin(th)

    def __call__(self, s, t):
        return self.fn(*self._xy(s, t))

    def grid(self, ss, ts):
        S, T = np.meshgrid(ss, ts, indexing="ij")
        return self(S, T)


@dataclass
class ProbeResult:
    point: tuple[float, float]
    radius: float
    arcs: int
    through_center: bool
    pieces: int

    def to_dict(self) -> dict:
        return {"point": list(self.point), "radius": self.radius, "arcs": self.arcs,
                "through_center": self.through_center, "pieces": self.pieces}


def gluing_probe(spec: FamilySpec, p, lam: float, radius: float = 0.05,
                 resolution: int = 512, r_min: float | None = None) -> ProbeResult:
    """Count the arcs of G_λ inside the disk of ``radius`` about ``p``.

    The annulus r_min < |q - p| < radius is traced in log-polar coordinates,
    so features at scale λ near p are resolved.  The seam θ = 0 ~ 2π is glued
    and the inner disk (radius r_min, default λ/100) is treated as one point:
    pieces that reach it belong to one arc through p.
    """
    p = (float(p[0]), float(p[1]))
    r_min = lam / 100 if r_min is None else r_min
    fn = planar_H(spec, lam)
    lp = _LogPolar(fn, p, r_min, radius)
    lat = Lattice(0.0, 1.0 / (resolution - 1), resolution)
    cs = trace_zero_set(lp, lat, refine=2, tol=0.0, merge_diagonals=0.0)
    n = len(cs.chains)
    if n == 0:
        return ProbeResult(p, radius, 0, False, 0)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    eps = 2 * cs.fine_h
    seam, inner = [], []
    for k, (c, cl) in enumerate(zip(cs.chains, cs.closed)):
        if cl:
            continue
        for end in (c[0], c[-1]):
            s, t = cs.vertices[end]
            if t < eps or t > 1 - eps:
                seam.append((s, t, k))
            if s < eps:
                inner.append(k)
    lo = [q for q in seam if q[1] < 0.5]
    hi = [q for q in seam if q[1] >= 0.5]
    for s0, _, k0 in lo:
        for s1, _, k1 in hi:
            if abs(s0 - s1) < eps:
                union(k0, k1)
    for k in inner[1:]:
        union(inner[0], k)
    arcs = len({find(k) for k in range(n)})
    return ProbeResult(p, radius, arcs, bool(inner), n)
