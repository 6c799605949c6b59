"""Orbits of X_λ: integration, the monotonicity of H, and cycle capture.

Along any orbit dH/dt = H |∇H|², so |H| grows forward in time off G_λ and
shrinks backward.  Cycles are captured by integrating backward until |H| is
tiny, then following the landing point forward once around.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from .family import FamilySpec
from .levelset import LevelSetTrace, planar_H
from .variety import ceil_sqrt

RTOL, ATOL = 1e-9, 1e-12
EQUILIBRIUM_TOL = 1e-13
CAPTURE_TOL = 1e-10
CYCLE_H_TOL = 1e-8
MONOTONE_SLACK = 1e-10


class StepSizeUnderflow(RuntimeError):
    pass


class NoConvergenceToCycle(RuntimeError):
    pass


class Field:
    """P, Q, H and ∇H of one member of the family, as fast scalar callables."""

    def __init__(self, spec: FamilySpec, lam: float):
        from .poly import PlanarPoly
        from fractions import Fraction
        self.lam = lam
        self.H = planar_H(spec, lam)
        self.Hx, self.Hy = self.H.diff("x"), self.H.diff("y")
        self.P = PlanarPoly.from_polynomial(spec.P, lam=Fraction(lam))
        self.Q = PlanarPoly.from_polynomial(spec.Q, lam=Fraction(lam))
        self._p, self._q, self._h = self.P.scalar, self.Q.scalar, self.H.scalar
        self.R_hat = ceil_sqrt(spec.R2)

    def rhs(self, sign: float, hamiltonian: bool = False):
        if hamiltonian:
            # X_H = (H_y, -H_x); equal to X on G_λ, and neutral rather than repelling
            hx, hy = self.Hx.scalar, self.Hy.scalar

            def fh(_t, z):
                return [sign * hy(z[0], z[1]), -sign * hx(z[0], z[1])]
            return fh
        p, q = self._p, self._q

        def f(_t, z):
            return [sign * p(z[0], z[1]), sign * q(z[0], z[1])]
        return f

    def h(self, x, y) -> float:
        return self._h(float(x), float(y))

    def speed(self, x, y) -> float:
        return math.hypot(self._p(x, y), self._q(x, y))

    def grad(self, x, y) -> np.ndarray:
        return np.array([float(self.Hx(x, y)), float(self.Hy(x, y))])


@dataclass
class Trajectory:
    t: np.ndarray
    xy: np.ndarray
    H: np.ndarray
    direction: str
    stop_reason: str
    stats: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y", "H"])
        for t, (x, y), h in zip(self.t, self.xy, self.H):
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), repr(float(h))])
        return buf.getvalue()


def integrate(spec_or_field, lam: float, p0, direction: str = "forward", t_max: float = 100.0,
              stop_abs_H: float | None = None, escape_abs_H: float | None = None,
              section=None, rtol: float = RTOL, atol: float = ATOL,
              hamiltonian: bool = False) -> Trajectory:
    """Dormand-Prince 5(4) integration of (P, Q) at fixed λ.

    Stops at ``t_max`` (time elapsed, in the chosen direction), when |p|
    exceeds 8R̂, near an equilibrium, when |H| drops below ``stop_abs_H`` or
    rises above ``escape_abs_H``, or at the first return to ``section = (point, normal)``.  With
    ``hamiltonian=True`` the Hamiltonian part X_H alone is integrated.
    """
    fld = spec_or_field if isinstance(spec_or_field, Field) else Field(spec_or_field, lam)
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    sign = 1.0 if direction == "forward" else -1.0
    x0, y0 = float(p0[0]), float(p0[1])
    if not (math.isfinite(x0) and math.isfinite(y0)):
        raise ValueError("p0 must be finite")
    if fld.speed(x0, y0) < EQUILIBRIUM_TOL:
        return Trajectory(np.array([0.0]), np.array([[x0, y0]]), np.array([fld.h(x0, y0)]),
                          direction, "equilibrium", {"nfev": 2, "steps": 0})

    f = fld.rhs(sign, hamiltonian)
    solver = RK45(f, 0.0, [x0, y0], t_max, rtol=rtol, atol=atol)
    ts, zs = [0.0], [(x0, y0)]
    stop = [("blowup", lambda z: 8 * fld.R_hat - math.hypot(z[0], z[1])),
            ("equilibrium", lambda z: fld.speed(z[0], z[1]) - EQUILIBRIUM_TOL)]
    if stop_abs_H is not None:
        stop.append(("captured", lambda z: abs(fld.h(z[0], z[1])) - stop_abs_H))
    if escape_abs_H is not None:
        stop.append(("escaped", lambda z: escape_abs_H - abs(fld.h(z[0], z[1]))))
    if section is not None:
        c, n = np.asarray(section[0], float), np.asarray(section[1], float)
        near, leave = 0.05 * fld.R_hat, 1e-3 * fld.R_hat
        armed = False
    reason = "t_max"
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(msg)
        t0, t1 = solver.t_old, solver.t
        z1 = solver.y
        hit = None
        for name, g in stop:
            if g(z1) <= 0:
                dense = solver.dense_output()
                tr = brentq(lambda t: g(dense(t)), t0, t1, xtol=1e-14) if g(dense(t0)) > 0 else t1
                hit = (name, tr, dense(tr))
                break
        if hit is None and section is not None:
            d = math.hypot(z1[0] - c[0], z1[1] - c[1])
            if armed and d < near:
                g0 = float(np.dot(zs[-1] - c, n))
                g1 = float(np.dot(z1 - c, n))
                if g0 < 0 <= g1:
                    dense = solver.dense_output()
                    tr = brentq(lambda t: float(np.dot(dense(t) - c, n)), t0, t1,
                                xtol=1e-15, rtol=4 * np.finfo(float).eps)
                    hit = ("returned", tr, dense(tr))
            armed = armed or d > leave
        if hit is not None:
            reason = hit[0]
            ts.append(hit[1])
            zs.append(np.asarray(hit[2], float))
            break
        ts.append(t1)
        zs.append(np.array(z1, float))
    xy = np.array(zs, dtype=float)
    H = np.array([fld.h(x, y) for x, y in xy])
    return Trajectory(sign * np.array(ts), xy, H, direction, reason,
                      {"nfev": int(solver.nfev), "steps": len(ts) - 1,
                       "rtol": rtol, "atol": atol})


def monotonicity_check(traj: Trajectory, slack: float = MONOTONE_SLACK) -> bool:
    """sign(H) constant and |H| monotone in the integration direction (forward: growing)."""
    H = traj.H
    if len(H) < 2:
        return True
    if np.any(np.sign(H) != np.sign(H[0])) or H[0] == 0:
        return False
    dA = np.diff(np.abs(H))
    if traj.direction == "forward":
        return bool(np.all(dA >= -slack))
    return bool(np.all(dA <= slack))


@dataclass
class Cycle:
    landing: tuple[float, float]
    period: float
    return_displacement: float
    closure_tol: float
    max_abs_H: float
    orbit: np.ndarray
    backward_time: float
    side_growth: dict
    follow: str = "field"

    @property
    def closed(self) -> bool:
        return self.return_displacement < self.closure_tol

    def to_dict(self) -> dict:
        return {"landing": list(self.landing), "period": self.period,
                "return_displacement": self.return_displacement,
                "closure_tol": self.closure_tol, "closed": self.closed,
                "max_abs_H": self.max_abs_H, "cycle_H_tol": CYCLE_H_TOL,
                "backward_time": self.backward_time, "side_growth": self.side_growth,
                "follow": self.follow,
                "samples": len(self.orbit)}


def locate_cycle(spec: FamilySpec, lam: float, seed, *, fld: Field | None = None,
                 t_back: float = 1e6, t_period: float = 1e5, side_eps: float = 1e-6,
                 rtol: float = RTOL, atol: float = ATOL) -> Cycle:
    """Backward capture onto G_λ, then one forward turn through a transversal section."""
    fld = fld or Field(spec, lam)
    back = integrate(fld, lam, seed, "backward", t_back, stop_abs_H=CAPTURE_TOL,
                     rtol=rtol, atol=atol)
    if back.stop_reason != "captured":
        raise NoConvergenceToCycle(f"backward orbit from {tuple(seed)} ended by {back.stop_reason}")
    p = back.xy[-1]
    v = np.array([fld._p(*p), fld._q(*p)])
    normal = v / np.linalg.norm(v)
    follow = "field"
    fwd = integrate(fld, lam, p, "forward", t_period, section=(p, normal), rtol=rtol, atol=atol,
                    escape_abs_H=CYCLE_H_TOL)
    if fwd.stop_reason != "returned":
        # strong repulsion can throw the forward X-orbit off G_λ within one
        # turn; on G_λ the orbit of X is the orbit of X_H, which is neutral
        follow = "hamiltonian"
        fwd = integrate(fld, lam, p, "forward", t_period, section=(p, normal),
                        rtol=rtol, atol=atol, hamiltonian=True)
    if fwd.stop_reason != "returned":
        raise NoConvergenceToCycle(f"orbit from the landing point ended by {fwd.stop_reason}")
    disp = float(np.hypot(*(fwd.xy[-1] - p)))
    period = float(fwd.t[-1])

    # isolation evidence: one turn from either side of G_λ along ∇H
    g = fld.grad(*p)
    g = g / np.linalg.norm(g)
    side = {}
    for name, s in (("plus", 1.0), ("minus", -1.0)):
        q = p + s * side_eps * g
        h0 = fld.h(*q)
        # off G_λ the growth can be explosive; stop once it is unmistakable
        tr = integrate(fld, lam, q, "forward", min(period, t_period), rtol=rtol, atol=atol,
                       escape_abs_H=1e4 * abs(h0) if h0 else None)
        side[name] = {"H_start": h0, "H_end": float(tr.H[-1]), "stop": tr.stop_reason,
                      "growth": float(abs(tr.H[-1]) / abs(h0)) if h0 else math.inf}
    return Cycle((float(p[0]), float(p[1])), period, disp, 1e-6 * fld.R_hat,
                 float(np.max(np.abs(fwd.H))), fwd.xy, float(-back.t[-1]), side, follow)


def component_seeds(trace: LevelSetTrace, fld: Field, target_H: float = 1e-7):
    """One seed per traced component, offset along ∇H from the vertex of largest |∇H|.

    The offset is the smaller of two cell diagonals and target_H/|∇H|.
    """
    seeds = []
    diag = trace.cell * math.sqrt(2.0)
    for k in range(trace.n_components):
        pts = trace.component_points(k)
        g = np.hypot(fld.Hx(pts[:, 0], pts[:, 1]), fld.Hy(pts[:, 0], pts[:, 1]))
        i = int(np.argmax(g))
        n = fld.grad(*pts[i])
        n /= np.linalg.norm(n)
        seeds.append(pts[i] + min(2 * diag, target_H / g[i]) * n)
    return seeds


def cycle_census(spec: FamilySpec, lam: float, trace: LevelSetTrace, **kw) -> list[Cycle]:
    """Locate a cycle from each component's seed; keep the geometrically distinct ones."""
    fld = Field(spec, lam)
    found: list[Cycle] = []
    sep = 10 * trace.cell
    for s in component_seeds(trace, fld):
        c = locate_cycle(spec, lam, s, fld=fld, **kw)
        if all(np.min(np.hypot(*(f.orbit - np.array(c.landing)).T)) > sep for f in found):
            found.append(c)
    return found
