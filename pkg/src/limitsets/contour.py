"""Marching-squares zero-contour extraction on a uniform lattice.

Shared by the variety tracer (``f = 0``) and the level-set tracer
(``H = 0``).  Cells near a sign change can be subdivided ``refine`` times;
every emitted vertex sits on a lattice edge whose end values bracket the
root, and is refined on that edge until the residual is tiny.  Vertices are
keyed by the lattice edge they sit on, so segments from neighbouring cells
chain exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .poly import PlanarPoly


@dataclass(frozen=True)
class Lattice:
    """Sample points ``lo + i*h`` for ``i`` in ``[0, n)`` on both axes."""

    lo: float
    h: float
    n: int

    @classmethod
    def centered(cls, half_width: float, n: int) -> "Lattice":
        # samples at cell centres of an n-cell partition of [-w, w]: avoids
        # landing exactly on dyadic lines such as x = 0 or x = 1
        h = 2.0 * half_width / n
        return cls(-half_width + 0.5 * h, h, n)

    @property
    def coords(self) -> np.ndarray:
        return self.lo + self.h * np.arange(self.n)

    def cell_centers(self) -> np.ndarray:
        return self.lo + self.h * (np.arange(self.n - 1) + 0.5)


@dataclass
class ContourSet:
    vertices: np.ndarray            # (m, 2)
    residuals: np.ndarray           # (m,) |fn(v)|
    chains: list[np.ndarray]        # vertex index polylines
    closed: list[bool]
    labels: np.ndarray              # component label per chain
    fine_h: float
    refined_cells: int = 0
    open_ends: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def polylines(self) -> list[np.ndarray]:
        out = []
        for c, closed in zip(self.chains, self.closed):
            pts = self.vertices[c]
            if closed:
                pts = np.vstack([pts, pts[:1]])
            out.append(pts)
        return out


def refine_on_edges(fn: PlanarPoly, p0: np.ndarray, p1: np.ndarray,
                    f0: np.ndarray, f1: np.ndarray, tol: float,
                    max_iter: int = 80) -> np.ndarray:
    """Illinois root refinement of ``fn`` on the segments ``p0 -> p1``.

    ``f0`` and ``f1`` must bracket a root (opposite signs or a zero).
    """
    m = len(p0)
    a = np.zeros(m)
    b = np.ones(m)
    fa = f0.astype(float).copy()
    fb = f1.astype(float).copy()
    ga, gb = fa.copy(), fb.copy()  # true (unscaled) end values
    last = np.zeros(m, dtype=np.int8)
    d = p1 - p0
    active = (np.abs(fa) > tol) & (np.abs(fb) > tol)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ai, bi, fai, fbi = a[idx], b[idx], fa[idx], fb[idx]
        denom = fbi - fai
        with np.errstate(divide="ignore", invalid="ignore"):
            t = bi - fbi * (bi - ai) / denom
        bad = ~np.isfinite(t) | (t <= ai) | (t >= bi)
        t = np.where(bad, 0.5 * (ai + bi), t)
        pts = p0[idx] + t[:, None] * d[idx]
        ft = fn(pts[:, 0], pts[:, 1])
        same_b = np.sign(ft) == np.sign(gb[idx])
        # replace b
        rb = idx[same_b]
        b[rb] = t[same_b]
        fb[rb] = ft[same_b]
        gb[rb] = ft[same_b]
        half = rb[last[rb] == 1]
        fa[half] *= 0.5
        last[rb] = 1
        # replace a
        ra = idx[~same_b]
        a[ra] = t[~same_b]
        fa[ra] = ft[~same_b]
        ga[ra] = ft[~same_b]
        half = ra[last[ra] == -1]
        fb[half] *= 0.5
        last[ra] = -1
        done = (np.abs(ft) <= tol) | (b[idx] - a[idx] <= 4e-16 * np.maximum(1.0, np.abs(b[idx])))
        active[idx[done]] = False
    t = np.where(np.abs(ga) <= np.abs(gb), a, b)
    return p0 + t[:, None] * d


# corner order: v0=(I,J) v1=(I+1,J) v2=(I+1,J+1) v3=(I,J+1)
# edge order:   e0=v0-v1 (h at I,J)  e1=v1-v2 (v at I+1,J)
#               e2=v3-v2 (h at I,J+1) e3=v0-v3 (v at I,J)
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))


def _edge_keys(I, J, width):
    # key = ((I * width) + J) * 2 + orient ; orient 0 = horizontal (x-step)
    return np.stack([
        (I * width + J) * 2,
        ((I + 1) * width + J) * 2 + 1,
        (I * width + J + 1) * 2,
        (I * width + J) * 2 + 1,
    ], axis=1)


def _cell_segments(vals: np.ndarray, center_pos: np.ndarray | None):
    """Marching-squares case table, vectorized.

    ``vals`` is (k, 4) corner values; returns (cell index, edge a, edge b).
    """
    pos = vals >= 0
    cross = np.stack([pos[:, a] != pos[:, b] for a, b in _EDGE_CORNERS], axis=1)
    ncross = cross.sum(axis=1)
    cells, ea, eb = [], [], []
    two = np.flatnonzero(ncross == 2)
    if two.size:
        sub = cross[two]
        first = np.argmax(sub, axis=1)
        second = 3 - np.argmax(sub[:, ::-1], axis=1)
        cells.append(two)
        ea.append(first)
        eb.append(second)
    four = np.flatnonzero(ncross == 4)
    if four.size:
        agree = pos[four, 0] == center_pos[four]
        # agree: cut off v1 and v3 -> (e0,e1),(e2,e3); else (e3,e0),(e1,e2)
        cells += [four, four]
        ea += [np.where(agree, 0, 3), np.where(agree, 2, 1)]
        eb += [np.where(agree, 1, 0), np.where(agree, 3, 2)]
    if not cells:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z
    return np.concatenate(cells), np.concatenate(ea), np.concatenate(eb)


def _chain(nv: int, seg_a: np.ndarray, seg_b: np.ndarray):
    """Walk degree <= 2 segment graphs into polylines."""
    nbr = [[] for _ in range(nv)]
    for a, b in zip(seg_a.tolist(), seg_b.tolist()):
        if a == b:
            continue
        nbr[a].append(b)
        nbr[b].append(a)
    seen = bytearray(nv)
    chains, closed = [], []

    def walk(start):
        path = [start]
        seen[start] = 1
        prev, cur = -1, start
        while True:
            nxt = [w for w in nbr[cur] if w != prev]
            step = None
            for w in nxt:
                if not seen[w]:
                    step = w
                    break
            if step is None:
                return path, (len(path) > 2 and start in nbr[cur])
            path.append(step)
            seen[step] = 1
            prev, cur = cur, step

    for v in range(nv):
        if not seen[v] and len(nbr[v]) == 1:
            path, _ = walk(v)
            chains.append(np.array(path, dtype=np.int64))
            closed.append(False)
    for v in range(nv):
        if not seen[v] and len(nbr[v]) >= 2:
            path, cl = walk(v)
            chains.append(np.array(path, dtype=np.int64))
            closed.append(bool(cl))
    return chains, closed, nbr


def _label_chains(vertices, chains, closed, merge_radius):
    n = len(chains)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    ends, owner = [], []
    for k, (c, cl) in enumerate(zip(chains, closed)):
        if not cl:
            ends += [vertices[c[0]], vertices[c[-1]]]
            owner += [k, k]
    if len(ends) > 1 and merge_radius > 0:
        tree = cKDTree(np.array(ends))
        for i, j in sorted(tree.query_pairs(merge_radius)):
            ri, rj = find(owner[i]), find(owner[j])
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = [find(i) for i in range(n)]
    remap: dict[int, int] = {}
    labels = np.array([remap.setdefault(r, len(remap)) for r in roots], dtype=np.int64)
    return labels


def _march_cells(fn, lattice, values, fine_cache, I, J, s, hf, width):
    corner_I = np.stack([I, I + 1, I + 1, I], axis=1)
    corner_J = np.stack([J, J, J + 1, J + 1], axis=1)
    if s == 1:
        vals = values[corner_I, corner_J]
    else:
        ids = corner_I * width + corner_J
        uniq, inv = np.unique(ids.ravel(), return_inverse=True)
        known = np.array([fine_cache.get(u, np.nan) for u in uniq.tolist()])
        miss = np.isnan(known)
        if miss.any():
            ui = uniq[miss] // width
            uj = uniq[miss] % width
            fv = fn(lattice.lo + ui * hf, lattice.lo + uj * hf)
            known[miss] = fv
            fine_cache.update(zip(uniq[miss].tolist(), fv.tolist()))
        vals = known[inv].reshape(ids.shape)
    cpos = vals >= 0
    sel = np.flatnonzero(cpos.any(axis=1) & ~cpos.all(axis=1))
    I, J, vals, cpos = I[sel], J[sel], vals[sel], cpos[sel]
    saddle = (cpos[:, 0] == cpos[:, 2]) & (cpos[:, 1] == cpos[:, 3]) & (cpos[:, 0] != cpos[:, 1])
    center_pos = np.zeros(len(sel), dtype=bool)
    if saddle.any():
        sx = lattice.lo + (I[saddle] + 0.5) * hf
        sy = lattice.lo + (J[saddle] + 0.5) * hf
        center_pos[saddle] = fn(sx, sy) >= 0
    cell, ea, eb = _cell_segments(vals, center_pos)
    keys = _edge_keys(I, J, width)
    return keys[cell, ea], keys[cell, eb]


def trace_zero_set(fn: PlanarPoly, lattice: Lattice, *, refine: int = 0,
                   tol: float = 1e-12, values: np.ndarray | None = None,
                   dilate: int = 2, max_grow: int = 400,
                   merge_diagonals: float = 1.5) -> ContourSet:
    """Extract ``{fn = 0}`` on ``lattice``.

    With ``refine > 0`` every coarse cell within ``dilate`` cells of a
    coarse sign change is subdivided into ``2**refine`` per side; regions
    are grown while chains end on the refined/unrefined frontier.
    """
    n = lattice.n
    s = 2 ** refine
    hf = lattice.h / s
    nf = (n - 1) * s + 1
    width = nf + 1
    if values is None:
        values = fn.grid(lattice.coords, lattice.coords)
    pos = values >= 0
    mixed = ((pos[:-1, :-1] != pos[1:, :-1]) | (pos[:-1, :-1] != pos[:-1, 1:])
             | (pos[:-1, :-1] != pos[1:, 1:]))

    if s == 1:
        flagged = mixed
    else:
        flagged = ndimage.binary_dilation(mixed, structure=np.ones((3, 3), bool),
                                          iterations=dilate) if dilate else mixed.copy()

    fine_cache: dict[int, float] = {}
    processed = np.zeros_like(flagged)
    seg_ka, seg_kb = [], []
    grow_rounds = 0
    while True:
        todo = flagged & ~processed
        processed |= todo
        ci, cj = np.nonzero(todo)
        if s == 1:
            I, J = ci, cj
        else:
            a, b = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
            I = (ci[:, None] * s + a.ravel()[None, :]).ravel()
            J = (cj[:, None] * s + b.ravel()[None, :]).ravel()
        if len(I):
            ka, kb = _march_cells(fn, lattice, values, fine_cache, I, J, s, hf, width)
            seg_ka.append(ka)
            seg_kb.append(kb)
        if s == 1 or grow_rounds >= max_grow:
            break
        # open ends on the refined frontier: flag the unrefined neighbours
        allk = np.concatenate(seg_ka + seg_kb) if seg_ka else np.zeros(0, np.int64)
        uk, counts = np.unique(allk, return_counts=True)
        grow = np.zeros_like(flagged)
        for key in uk[counts == 1].tolist():
            orient = key & 1
            ei, ej = divmod(key >> 1, width)
            cells = ((ei, ej - 1), (ei, ej)) if orient == 0 else ((ei - 1, ej), (ei, ej))
            for fi, fj in cells:
                if 0 <= fi < nf - 1 and 0 <= fj < nf - 1:
                    gi, gj = fi // s, fj // s
                    if not flagged[gi, gj]:
                        grow[max(gi - 1, 0):gi + 2, max(gj - 1, 0):gj + 2] = True
        grow &= ~flagged
        if not grow.any():
            break
        flagged |= grow
        grow_rounds += 1

    ka = np.concatenate(seg_ka) if seg_ka else np.zeros(0, np.int64)
    kb = np.concatenate(seg_kb) if seg_kb else np.zeros(0, np.int64)
    uk, inv = np.unique(np.concatenate([ka, kb]), return_inverse=True)
    seg_a, seg_b = inv[:len(ka)], inv[len(ka):]
    chains, closed, _ = _chain(len(uk), seg_a, seg_b)

    # edge end points and values, then root refinement
    orient = uk & 1
    base = uk >> 1
    ei, ej = base // width, base % width
    p0 = np.stack([lattice.lo + ei * hf, lattice.lo + ej * hf], axis=1)
    step = np.stack([orient == 0, orient == 1], axis=1).astype(float) * hf
    p1 = p0 + step
    if s == 1:
        f0 = values[ei, ej]
        f1 = values[ei + (orient == 0), ej + (orient == 1)]
    else:
        i1 = ei + (orient == 0)
        j1 = ej + (orient == 1)
        f0 = np.array([fine_cache[k] for k in (ei * width + ej).tolist()])
        f1 = np.array([fine_cache[k] for k in (i1 * width + j1).tolist()])
    verts = refine_on_edges(fn, p0, p1, f0, f1, tol) if len(uk) else np.zeros((0, 2))
    res = np.abs(fn(verts[:, 0], verts[:, 1])) if len(verts) else np.zeros(0)
    labels = _label_chains(verts, chains, closed, merge_diagonals * hf * np.sqrt(2.0))
    open_ends = sum(2 for cl in closed if not cl)
    return ContourSet(verts, res, chains, closed, labels, hf,
                      refined_cells=int(flagged.sum()) if s > 1 else 0,
                      open_ends=open_ends,
                      meta={"edge_keys": uk, "grow_rounds": grow_rounds})
