"""Region decomposition of the open disk minus Z(f), adjacency tree, gluing points."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .contour import Lattice, refine_on_edges
from .poly import PlanarPoly, Polynomial
from .variety import GRAD_TOL, RESIDUAL_TOL, ceil_sqrt

POSITIVE, NEGATIVE, CROSSING, OUTSIDE = 1, -1, 0, 2
MAX_COMPONENTS = 64

_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = np.ones((3, 3), dtype=bool)


class ResolutionTooCoarse(ValueError):
    pass


class NoExteriorComponent(ValueError):
    pass


class DisconnectedAdjacencyGraph(RuntimeError):
    pass


class NoRegularBoundaryPoint(ValueError):
    pass


@dataclass
class RegionDecomposition:
    f: Polynomial
    R2: Fraction
    lattice: Lattice
    values: np.ndarray       # f at lattice samples
    kind: np.ndarray         # per cell: POSITIVE / NEGATIVE / CROSSING / OUTSIDE
    labels: np.ndarray       # per cell component id, -1 elsewhere
    exterior: list[bool]
    sizes: list[int]

    @property
    def n_components(self) -> int:
        return len(self.exterior)


@dataclass
class Support:
    decomposition: RegionDecomposition
    index_of: list[int]      # component id -> support index (0 = merged exterior)
    labels: np.ndarray       # per cell support index, -1 elsewhere
    I: list[int]


@dataclass
class GluingPlan:
    I: list[int]
    F: list[tuple[int, int]]
    E: list[tuple[int, int]]
    points: dict[tuple[int, int], tuple[float, float]]
    quality: dict[tuple[int, int], dict]

    def to_json(self) -> str:
        doc = {
            "indices": self.I,
            "adjacency_edges": [list(e) for e in self.F],
            "tree_edges": [list(e) for e in self.E],
            "gluing_points": [
                {"edge": list(e), "x": self.points[e][0], "y": self.points[e][1],
                 **self.quality[e]} for e in self.E],
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def decompose(f: Polynomial, R2, resolution: int = 256) -> RegionDecomposition:
    """Label the connected components of B_R minus Z(f) on a sign grid."""
    R2 = Fraction(R2)
    lat = Lattice.centered(ceil_sqrt(R2), resolution)
    fn = PlanarPoly.from_polynomial(f)
    V = fn.grid(lat.coords, lat.coords)
    pos = V >= 0
    allpos = pos[:-1, :-1] & pos[1:, :-1] & pos[:-1, 1:] & pos[1:, 1:]
    allneg = ~(pos[:-1, :-1] | pos[1:, :-1] | pos[:-1, 1:] | pos[1:, 1:])
    cc = lat.cell_centers()
    inside = (cc[:, None] ** 2 + cc[None, :] ** 2) < float(R2)
    kind = np.full(inside.shape, CROSSING, dtype=np.int8)
    kind[allpos] = POSITIVE
    kind[allneg] = NEGATIVE
    kind[~inside] = OUTSIDE

    # a positive and a negative cell cannot share an edge, so one 4-connected
    # labelling of the sign cells gives the components (raster order)
    lab, count = ndimage.label((kind == POSITIVE) | (kind == NEGATIVE), structure=_FOUR)
    labels = (lab - 1).astype(np.int32)

    sizes = np.bincount(labels[labels >= 0], minlength=count).tolist()
    if sizes and min(sizes) < 4:
        raise ResolutionTooCoarse(
            f"component of {min(sizes)} cells at resolution {resolution}")

    ring = inside & ~ndimage.binary_erosion(inside, structure=_FOUR, border_value=0)
    exterior = []
    for c in range(count):
        cells = ring & (labels == c)
        if cells.sum() < 2:
            exterior.append(False)
            continue
        # two ring cells of the component that are 8-neighbours
        neighbours = ndimage.convolve(cells.astype(np.int8), _EIGHT.astype(np.int8),
                                      mode="constant") - cells
        exterior.append(bool((neighbours[cells] > 0).any()))
    return RegionDecomposition(f, R2, lat, V, kind, labels, exterior, sizes)


def build_support(dec: RegionDecomposition) -> Support:
    """Merge exterior components into index 0 and number the rest 1, 2, ..."""
    if not any(dec.exterior):
        raise NoExteriorComponent("no component of B_R \\ Z(f) meets the circle along an arc")
    index_of = []
    nxt = 1
    for ext in dec.exterior:
        if ext:
            index_of.append(0)
        else:
            index_of.append(nxt)
            nxt += 1
    if nxt > MAX_COMPONENTS:
        raise ResolutionTooCoarse(f"{nxt} support components exceed the cap of {MAX_COMPONENTS}")
    lut = np.array(index_of + [-1], dtype=np.int32)
    labels = np.where(dec.labels >= 0, lut[dec.labels], -1)
    return Support(dec, index_of, labels, list(range(nxt)))


def _contact_cells(support: Support) -> dict[tuple[int, int], set[tuple[int, int]]]:
    """Crossing cells whose 8-neighbourhood meets both regions of a pair."""
    lab = support.labels
    kind = support.decomposition.kind
    padded = np.pad(lab, 1, constant_values=-1)
    n0, n1 = lab.shape
    contacts: dict[tuple[int, int], set] = {}
    for i, j in np.argwhere(kind == CROSSING).tolist():
        window = padded[i:i + 3, j:j + 3]
        seen = sorted(set(window[window >= 0].tolist()))
        for a in range(len(seen)):
            for b in range(a + 1, len(seen)):
                contacts.setdefault((seen[a], seen[b]), set()).add((i, j))
    return contacts


def _has_chain(cells: set[tuple[int, int]]) -> bool:
    for i, j in cells:
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if (di or dj) and (i + di, j + dj) in cells:
                    return True
    return False


def adjacency_graph(support: Support) -> list[tuple[int, int]]:
    """Pairs of support regions sharing a boundary arc (>= 2 linked contact cells)."""
    return sorted(pair for pair, cells in _contact_cells(support).items() if _has_chain(cells))


def spanning_tree(I: list[int], F: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Breadth-first spanning tree rooted at 0, neighbours in ascending order."""
    if not I:
        return []
    adj: dict[int, list[int]] = {i: [] for i in I}
    for a, b in F:
        adj[a].append(b)
        adj[b].append(a)
    root = 0 if 0 in adj else min(I)
    seen = {root}
    queue = deque([root])
    E = []
    while queue:
        u = queue.popleft()
        for v in sorted(adj[u]):
            if v not in seen:
                seen.add(v)
                E.append((min(u, v), max(u, v)))
                queue.append(v)
    if len(seen) != len(I):
        missing = sorted(set(I) - seen)
        raise DisconnectedAdjacencyGraph(
            f"regions {missing} are not reachable from {root}; edges {F}")
    return E


def pick_gluing_points(E, support: Support, f: Polynomial | None = None) -> GluingPlan:
    """Choose one regular point of Z(f) on the boundary shared by each tree edge."""
    dec = support.decomposition
    f = dec.f if f is None else f
    fn = PlanarPoly.from_polynomial(f)
    fx, fy = fn.diff("x"), fn.diff("y")
    lat = dec.lattice
    xs = lat.coords
    V = dec.values
    contacts = _contact_cells(support)
    F = adjacency_graph(support)
    points, quality = {}, {}
    chosen: list[tuple[float, float]] = []
    for e in E:
        e = (min(e), max(e))
        cells = sorted(contacts.get(e, ()))
        p0s, p1s, f0s, f1s = [], [], [], []
        for i, j in cells:
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            for a, b in ((0, 1), (1, 2), (3, 2), (0, 3)):
                (ia, ja), (ib, jb) = corners[a], corners[b]
                if (V[ia, ja] >= 0) != (V[ib, jb] >= 0):
                    p0s.append((xs[ia], xs[ja]))
                    p1s.append((xs[ib], xs[jb]))
                    f0s.append(V[ia, ja])
                    f1s.append(V[ib, jb])
        if not p0s:
            raise NoRegularBoundaryPoint(f"no boundary samples for edge {e}")
        pts = refine_on_edges(fn, np.array(p0s), np.array(p1s), np.array(f0s),
                              np.array(f1s), RESIDUAL_TOL * 1e-2)
        vals = np.abs(fn(pts[:, 0], pts[:, 1]))
        grad = np.hypot(fx(pts[:, 0], pts[:, 1]), fy(pts[:, 0], pts[:, 1]))
        ok = vals < RESIDUAL_TOL
        for q in chosen:
            ok &= np.hypot(pts[:, 0] - q[0], pts[:, 1] - q[1]) > 1e-9
        if not ok.any() or grad[ok].max() <= GRAD_TOL:
            raise NoRegularBoundaryPoint(f"every boundary sample of edge {e} is singular")
        best = grad[ok].max()
        tied = np.flatnonzero(ok & (grad >= best * (1 - 1e-9)))
        k = min(tied.tolist(), key=lambda t: (pts[t, 0], pts[t, 1]))
        p = (float(pts[k, 0]), float(pts[k, 1]))
        chosen.append(p)
        points[e] = p
        quality[e] = {"abs_f": float(vals[k]), "grad_norm": float(grad[k])}
    return GluingPlan(list(support.I), F, [(min(e), max(e)) for e in E], points, quality)


def gamma_components(dec: RegionDecomposition) -> int:
    """Connected components of Γ, counted on the crossing cells (8-connected)."""
    band = dec.kind == CROSSING
    _, k = ndimage.label(band, structure=_EIGHT)
    return int(k)


def analyze_support(f: Polynomial, R2, resolution: int = 256):
    """decompose -> support -> adjacency graph -> tree -> gluing points."""
    dec = decompose(f, R2, resolution)
    sup = build_support(dec)
    F = adjacency_graph(sup)
    E = spanning_tree(sup.I, F)
    plan = pick_gluing_points(E, sup)
    return dec, sup, plan


def distance_to_component(support: Support, index: int, p: tuple[float, float]) -> float:
    """Distance from p to the union of cells (closed squares) labelled ``index``."""
    lat = support.decomposition.lattice
    ij = np.argwhere(support.labels == index)
    lo_x = lat.lo + ij[:, 0] * lat.h
    lo_y = lat.lo + ij[:, 1] * lat.h
    dx = np.maximum.reduce([lo_x - p[0], np.zeros(len(ij)), p[0] - (lo_x + lat.h)])
    dy = np.maximum.reduce([lo_y - p[1], np.zeros(len(ij)), p[1] - (lo_y + lat.h)])
    return float(np.min(np.hypot(dx, dy))) if len(ij) else math.inf
