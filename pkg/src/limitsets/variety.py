"""Trace Γ = Z(f) ∩ closed disk of radius R and check the input hypotheses."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import cKDTree

from .contour import Lattice, trace_zero_set
from .poly import PlanarPoly, Polynomial

RESIDUAL_TOL = 1e-12
GRAD_TOL = 1e-6
TRANSVERSALITY_TOL = 1e-8


class EmptyGamma(ValueError):
    """Z(f) does not meet the closed disk."""


def ceil_sqrt(r2: Fraction) -> int:
    """Smallest integer k with k*k >= r2."""
    r2 = Fraction(r2)
    k = math.isqrt(r2.numerator // r2.denominator)
    while k * k < r2:
        k += 1
    return max(k, 1)


@dataclass
class GammaTrace:
    arcs: list[np.ndarray]
    residuals: list[np.ndarray]
    singular_points: list[tuple[float, float]]
    boundary_points: list[tuple[float, float]]
    R2: Fraction
    resolution: int
    cell: float
    boundary_degenerate: bool = False
    singular_extents: list[float] = field(default_factory=list)
    close_singular_pairs: list[tuple[int, int]] = field(default_factory=list)

    @property
    def R(self) -> float:
        return math.sqrt(self.R2)

    def points(self) -> np.ndarray:
        """Every sample of Γ: arc vertices, boundary and singular points."""
        parts = [a for a in self.arcs if len(a)]
        if self.boundary_points:
            parts.append(np.array(self.boundary_points, dtype=float))
        if self.singular_points:
            parts.append(np.array(self.singular_points, dtype=float))
        return np.vstack(parts) if parts else np.zeros((0, 2))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "abs_f", "arc_id"])
        for k, (arc, res) in enumerate(zip(self.arcs, self.residuals)):
            for (x, y), r in zip(arc, res):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(r)), k])
        return buf.getvalue()


def _split_inside(chain_pts: np.ndarray, res: np.ndarray, inside: np.ndarray):
    out = []
    start = None
    for i, ok in enumerate(inside):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            out.append((chain_pts[start:i], res[start:i]))
            start = None
    if start is not None:
        out.append((chain_pts[start:], res[start:]))
    return [(p, r) for p, r in out if len(p) >= 2]


def find_singular_points(f: Polynomial, R2: Fraction, resolution: int):
    """Newton-polished critical zeros of f in the disk, grouped into clusters.

    Returns (centres, extents) where extent is the diameter of each cluster.
    """
    R_hat = ceil_sqrt(R2)
    lat = Lattice.centered(R_hat, resolution)
    xs = lat.coords
    fn = PlanarPoly.from_polynomial(f)
    fx, fy = fn.diff("x"), fn.diff("y")
    fxx, fxy, fyy = fx.diff("x"), fx.diff("y"), fy.diff("y")
    V = fn.grid(xs, xs)
    G = fx.grid(xs, xs) ** 2 + fy.grid(xs, xs) ** 2

    pos = V >= 0
    mixed = ((pos[:-1, :-1] != pos[1:, :-1]) | (pos[:-1, :-1] != pos[:-1, 1:])
             | (pos[:-1, :-1] != pos[1:, 1:]))
    near = np.zeros_like(pos)
    near[:-1, :-1] |= mixed
    near[1:, :-1] |= mixed
    near[:-1, 1:] |= mixed
    near[1:, 1:] |= mixed
    from scipy.ndimage import minimum_filter
    gmin = G <= minimum_filter(G, size=3, mode="nearest")
    absV = np.abs(V)
    vmin = absV <= minimum_filter(absV, size=3, mode="nearest")
    h = lat.h
    touch = vmin & (absV <= h * np.sqrt(G) + h * h)
    seeds = np.argwhere((near & gmin) | (touch & gmin) | touch)
    if len(seeds) == 0:
        return [], []
    p = np.stack([xs[seeds[:, 0]], xs[seeds[:, 1]]], axis=1)
    p0 = p.copy()
    for _ in range(40):
        gx, gy = fx(p[:, 0], p[:, 1]), fy(p[:, 0], p[:, 1])
        J = np.empty((len(p), 2, 2))
        J[:, 0, 0] = fxx(p[:, 0], p[:, 1])
        J[:, 0, 1] = J[:, 1, 0] = fxy(p[:, 0], p[:, 1])
        J[:, 1, 1] = fyy(p[:, 0], p[:, 1])
        step = np.einsum("kij,kj->ki", np.linalg.pinv(J), np.stack([gx, gy], axis=1))
        p = p - step
        if np.all(np.abs(step) < 1e-15):
            break
    gx, gy = fx(p[:, 0], p[:, 1]), fy(p[:, 0], p[:, 1])
    val = np.abs(fn(p[:, 0], p[:, 1]))
    r2 = float(R2)
    ok = (np.hypot(gx, gy) < GRAD_TOL) & (val < RESIDUAL_TOL) \
        & (p[:, 0] ** 2 + p[:, 1] ** 2 <= r2 * (1 + 1e-9)) \
        & (np.hypot(*(p - p0).T) <= 3 * h)
    pts = p[ok]
    if len(pts) == 0:
        return [], []
    tree = cKDTree(pts)
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(tree.query_pairs(2 * h)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(pts)):
        groups.setdefault(find(i), []).append(i)
    centres, extents = [], []
    for members in groups.values():
        q = pts[members]
        c = q.mean(axis=0)
        # snap to the member nearest the mean; members are polished zeros
        c = q[np.argmin(np.hypot(*(q - c).T))]
        centres.append((float(c[0]), float(c[1])))
        extents.append(float(np.ptp(q, axis=0).max()) if len(q) > 1 else 0.0)
    order = sorted(range(len(centres)), key=lambda k: centres[k])
    return [centres[k] for k in order], [extents[k] for k in order]


def find_boundary_points(f: Polynomial, R2: Fraction, resolution: int):
    """Zeros of f on the circle of radius R; flags a degenerate (dense) case."""
    R = math.sqrt(R2)
    fn = PlanarPoly.from_polynomial(f)
    m = 8 * resolution
    th = 2 * np.pi * (np.arange(m) + 0.5) / m
    vals = fn(R * np.cos(th), R * np.sin(th))
    sgn = vals >= 0
    change = np.flatnonzero(sgn != np.roll(sgn, -1))
    near_zero = int(np.sum(np.abs(vals) <= RESIDUAL_TOL))
    if len(change) + near_zero > resolution / 4:
        return [], True

    def g(t):
        return float(fn(R * math.cos(t), R * math.sin(t)))

    pts = []
    for k in change.tolist():
        a, b = th[k], th[k] + 2 * np.pi / m
        t = brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        pts.append((R * math.cos(t), R * math.sin(t)))
    # touching zeros (no sign change): polish local minima of |f|
    a = np.abs(vals)
    touch = np.flatnonzero((a <= np.roll(a, 1)) & (a < np.roll(a, -1)))
    crossed = set(change.tolist())
    step = 2 * np.pi / m
    for k in touch.tolist():
        if k in crossed or (k - 1) % m in crossed:
            continue
        res = minimize_scalar(lambda t: g(t) ** 2, bounds=(th[k] - step, th[k] + step),
                              method="bounded", options={"xatol": 1e-14})
        if abs(g(res.x)) < RESIDUAL_TOL:
            pts.append((R * math.cos(res.x), R * math.sin(res.x)))
    pts.sort()
    return pts, False


def extract_gamma(f: Polynomial, R2, resolution: int = 256) -> GammaTrace:
    """Marching-squares trace of Z(f) inside the closed disk x²+y² ≤ R2."""
    if resolution < 64:
        raise ValueError("resolution must be >= 64")
    if f.is_zero() or set(f.used_variables()) - {"x", "y"}:
        raise ValueError("f must be a nonzero polynomial in x and y")
    R2 = Fraction(R2)
    R_hat = ceil_sqrt(R2)
    lat = Lattice.centered(R_hat, resolution)
    fn = PlanarPoly.from_polynomial(f)
    cs = trace_zero_set(fn, lat, refine=0, tol=RESIDUAL_TOL * 1e-2, merge_diagonals=0.0)
    r2 = float(R2)
    sing, extents = find_singular_points(f, R2, resolution)
    sing_tree = cKDTree(np.array(sing)) if sing else None
    arcs, residuals = [], []
    for chain, closed in zip(cs.chains, cs.closed):
        idx = np.concatenate([chain, chain[:1]]) if closed else chain
        pts = cs.vertices[idx]
        res = cs.residuals[idx]
        keep = pts[:, 0] ** 2 + pts[:, 1] ** 2 <= r2
        if sing_tree is not None:
            # marching squares turns at saddles; cut arcs there instead
            d, _ = sing_tree.query(pts)
            keep &= d > lat.h
        for p, r in _split_inside(pts, res, keep):
            arcs.append(p)
            residuals.append(r)
    bpts, degenerate = find_boundary_points(f, R2, resolution)
    if not arcs and not sing and not bpts and not degenerate:
        raise EmptyGamma("Z(f) does not meet the closed disk")
    close = []
    for i in range(len(sing)):
        for j in range(i + 1, len(sing)):
            if math.dist(sing[i], sing[j]) < 4 * lat.h:
                close.append((i, j))
    return GammaTrace(arcs, residuals, sing, bpts, R2, resolution, lat.h,
                      boundary_degenerate=degenerate, singular_extents=extents,
                      close_singular_pairs=close)


@dataclass
class HypothesisReport:
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    h4_ok: bool
    witnesses: dict

    @property
    def all_ok(self) -> bool:
        return self.h1_ok and self.h2_ok and self.h3_ok and self.h4_ok

    @property
    def weak_ok(self) -> bool:
        """Hypotheses needed by the star construction and by the gluing step."""
        return self.h1_ok and self.h2_ok and self.h3_ok

    def to_dict(self) -> dict:
        return {"h1_ok": self.h1_ok, "h2_ok": self.h2_ok, "h3_ok": self.h3_ok,
                "h4_ok": self.h4_ok, "witnesses": self.witnesses}


def transversality(f: Polynomial, p: tuple[float, float]) -> float:
    """<grad f(p)^perp, p> with v^perp = (-v_y, v_x)."""
    fx = PlanarPoly.from_polynomial(f.diff("x"))
    fy = PlanarPoly.from_polynomial(f.diff("y"))
    gx, gy = float(fx(*p)), float(fy(*p))
    return -gy * p[0] + gx * p[1]


def check_hypotheses(f: Polynomial, R2, trace: GammaTrace) -> HypothesisReport:
    R2 = Fraction(R2)
    w: dict = {"resolution": trace.resolution}
    h1 = True  # polynomials are entire
    h2 = bool(trace.arcs or trace.singular_points or trace.boundary_points)
    w["h2"] = {"arc_count": len(trace.arcs), "vertex_count": int(sum(len(a) for a in trace.arcs))}

    fine, fine_ext = find_singular_points(f, R2, 2 * trace.resolution)
    isolated = all(e <= 4 * trace.cell for e in trace.singular_extents) and \
        all(e <= 4 * trace.cell for e in fine_ext)
    h3 = isolated and len(fine) == len(trace.singular_points)
    w["h3"] = {
        "singular_points": [list(p) for p in trace.singular_points],
        "count": len(trace.singular_points),
        "count_refined": len(fine),
        "max_cluster_extent": max(trace.singular_extents, default=0.0),
        "extent_tol": 4 * trace.cell,
        "close_pairs": [list(p) for p in trace.close_singular_pairs],
    }

    checks = []
    for p in trace.boundary_points:
        checks.append({"point": list(p), "transversality": transversality(f, p)})
    bad = [c for c in checks if abs(c["transversality"]) <= TRANSVERSALITY_TOL]
    h4 = (not trace.boundary_degenerate) and not bad
    w["h4"] = {"boundary_degenerate": trace.boundary_degenerate,
               "boundary_points": checks, "failing": bad,
               "tolerance": TRANSVERSALITY_TOL}
    return HypothesisReport(h1, h2, h3, h4, w)
