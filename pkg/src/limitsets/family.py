"""Symbolic construction of H(x, y, λ) and of the vector field family X_λ.

    H  = f² + λ (x² + y² − R²) ∏_e ((x − x_e)² + (y − y_e)² − λ²) − α λ⁴   (full)
    H* = f² + λ (x² + y² − R²) − α λ²                                      (star)
    X_λ = (H_y + H H_x,  −H_x + H H_y)

The field is the Hamiltonian field of H plus H times its gradient, so
``X_λ(H) = H |∇H|²``; :func:`verify_identity` checks this exactly.
"""
from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .poly import Polynomial, to_text

FULL, STAR = "full", "star"
ALPHA_GRID = 1024
_DIRECT_PAIRS = 200_000


class DegreeBoundViolated(AssertionError):
    pass


def rationalize(v: float, max_den: int = 2 ** 16, tol: float = 1e-9) -> Fraction:
    """Small-denominator rational if one is within ``tol``; else the exact binary value."""
    if isinstance(v, Fraction):
        return v
    approx = Fraction(v).limit_denominator(max_den)
    if abs(float(approx) - v) <= tol:
        return approx
    return Fraction(v)


@dataclass
class DegreeLedger:
    variant: str
    M: int
    n_edges: int
    deg_H: int
    deg_P: int
    deg_Q: int
    deg_X: int
    degree_bound: int
    h_degree_bound: int
    star_degree: int
    harnack_ok: bool
    within_degree_bound: bool
    within_h_bound: bool
    star_exact: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FamilySpec:
    f: Polynomial
    R2: Fraction
    gluing: list[tuple[Fraction, Fraction]]
    alpha: Fraction
    H: Polynomial
    P: Polynomial
    Q: Polynomial
    variant: str = FULL
    degree_ledger: DegreeLedger | None = None
    alpha_history: list[Fraction] = field(default_factory=list)

    def with_alpha(self, alpha) -> "FamilySpec":
        return build_family(self.f, self.R2, self.gluing, alpha, self.variant,
                            alpha_history=self.alpha_history + [Fraction(alpha)])

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "alpha": str(self.alpha),
            "alpha_history": [str(a) for a in self.alpha_history],
            "R_squared": str(self.R2),
            "f": to_text(self.f),
            "gluing_points": [
                {"x": str(x), "y": str(y), "x_float": float(x), "y_float": float(y)}
                for x, y in self.gluing],
            "H": to_text(self.H),
            "P": to_text(self.P),
            "Q": to_text(self.Q),
            "degree_ledger": self.degree_ledger.to_dict() if self.degree_ledger else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _xy():
    return Polynomial.var("x"), Polynomial.var("y"), Polynomial.var("lam")


def build_H(f: Polynomial, R2, gluing=(), alpha=0, variant: str = FULL) -> Polynomial:
    """Exact expansion of H (or H* for ``variant="star"``).

    Gluing coordinates and ``alpha`` may be rationals or polynomials (symbols).
    An empty gluing set contributes the empty product 1.
    """
    x, y, lam = _xy()
    if not isinstance(R2, Polynomial):
        R2 = Fraction(R2)
    circle = x * x + y * y - R2
    if variant == STAR:
        return f * f + lam * circle - lam * lam * alpha
    if variant != FULL:
        raise ValueError(f"unknown variant {variant!r}")
    prod = Polynomial.constant(1)
    for xe, ye in gluing:
        prod = prod * ((x - xe) ** 2 + (y - ye) ** 2 - lam * lam)
    return f * f + lam * circle * prod - (lam ** 4) * alpha


def build_field(H: Polynomial) -> tuple[Polynomial, Polynomial]:
    """X = X_H + H ∇H with X_H = (H_y, −H_x)."""
    Hx, Hy = H.diff("x"), H.diff("y")
    return Hy + H * Hx, -Hx + H * Hy


def build_family(f: Polynomial, R2, gluing=(), alpha=0, variant: str = FULL,
                 alpha_history=None) -> FamilySpec:
    gluing = [(rationalize(px), rationalize(py)) for px, py in gluing]
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    H = build_H(f, R2, gluing, alpha, variant)
    P, Q = build_field(H)
    spec = FamilySpec(f, Fraction(R2), gluing, alpha, H, P, Q, variant,
                      alpha_history=list(alpha_history) if alpha_history else [alpha])
    spec.degree_ledger = degree_ledger(spec)
    return spec


def symbolic_H(f: Polynomial, R2, n_gluing: int, variant: str = FULL) -> Polynomial:
    """H with ``alpha`` and gluing coordinates ``xe<k>, ye<k>`` left as symbols."""
    alpha = Polynomial.var("alpha")
    gluing = [(Polynomial.var(f"xe{k}"), Polynomial.var(f"ye{k}")) for k in range(1, n_gluing + 1)]
    return build_H(f, R2, gluing if variant == FULL else (), alpha, variant)


def identity_residual(H: Polynomial, P: Polynomial, Q: Polynomial,
                      method: str = "auto") -> Polynomial:
    """P·H_x + Q·H_y − H·(H_x² + H_y²), computed exactly.

    ``method="factored"`` evaluates the same polynomial regrouped as
    H_x·(P − H_y − H·H_x) + H_y·(Q + H_x − H·H_y), which avoids multiplying
    the (large) field components by the gradient when they are correct.
    """
    Hx, Hy = H.diff("x"), H.diff("y")
    if method == "auto":
        method = "direct" if len(P) * len(Hx) <= _DIRECT_PAIRS else "factored"
    if method == "direct":
        return P * Hx + Q * Hy - H * (Hx * Hx + Hy * Hy)
    DP = P - Hy - H * Hx
    DQ = Q + Hx - H * Hy
    if DP.is_zero() and DQ.is_zero():
        return Polynomial._raw({}, DP.variables)
    return Hx * DP + Hy * DQ


@dataclass
class IdentityResult:
    ok: bool
    residual: Polynomial
    mode: str

    def to_dict(self) -> dict:
        return {"ok": self.ok, "mode": self.mode, "residual_terms": len(self.residual),
                "tolerance": 0}


def verify_identity(spec: FamilySpec, indeterminate: bool = False,
                    method: str = "auto") -> IdentityResult:
    """Exact check of X_λ(H) = H·|∇H|².

    In indeterminate mode α and the gluing coordinates are symbols, so a
    zero residual holds for every numeric choice of them.
    """
    if indeterminate:
        H = symbolic_H(spec.f, spec.R2, len(spec.gluing), spec.variant)
        P, Q = build_field(H)
    else:
        H, P, Q = spec.H, spec.P, spec.Q
    res = identity_residual(H, P, Q, method)
    return IdentityResult(res.is_zero(), res, "indeterminate" if indeterminate else "numeric")


def degree_ledger(spec: FamilySpec) -> DegreeLedger:
    M = int(spec.f.degree_xy())
    nE = len(spec.gluing) if spec.variant == FULL else 0
    deg_H = int(spec.H.degree_xy())
    deg_P = int(spec.P.degree_xy()) if spec.P else -1
    deg_Q = int(spec.Q.degree_xy()) if spec.Q else -1
    deg_X = max(deg_P, deg_Q)
    bound = 2 * (M - 1) * (M - 2) + 7
    h_bound = max(2 * M, (M - 1) * (M - 2) + 2)
    return DegreeLedger(
        variant=spec.variant, M=M, n_edges=nE, deg_H=deg_H, deg_P=deg_P, deg_Q=deg_Q,
        deg_X=deg_X, degree_bound=bound, h_degree_bound=h_bound, star_degree=4 * M - 1,
        harnack_ok=2 * nE + 2 <= h_bound,
        within_degree_bound=deg_X <= bound,
        within_h_bound=deg_H <= h_bound,
        star_exact=deg_X == 4 * M - 1,
    )


def check_degree_bound(spec: FamilySpec) -> DegreeLedger:
    """Compute the degree ledger; raise if the applicable bound fails."""
    if spec.f.degree_xy() < 1:
        raise ValueError("f must have degree >= 1")
    led = degree_ledger(spec)
    if spec.variant == FULL and led.harnack_ok and not led.within_degree_bound:
        raise DegreeBoundViolated(
            f"deg X = {led.deg_X} exceeds 2(M-1)(M-2)+7 = {led.degree_bound}")
    if spec.variant == STAR and not led.star_exact:
        raise DegreeBoundViolated(f"deg X = {led.deg_X} differs from 4M-1 = {led.star_degree}")
    return led


def alpha_candidates(seed: int) -> list[Fraction]:
    """Resampling order for α: the grid k/1024, k = 1..1024, shuffled by ``seed``."""
    ks = list(range(1, ALPHA_GRID + 1))
    random.Random(seed).shuffle(ks)
    return [Fraction(k, ALPHA_GRID) for k in ks]


def transcript(spec: FamilySpec, plan=None, decomposition=None) -> str:
    lines = [f"f = {to_text(spec.f)}", f"R^2 = {spec.R2}"]
    if decomposition is not None:
        ext = sum(decomposition.exterior)
        lines.append(f"first support: {decomposition.n_components} regions "
                     f"({ext} exterior, {decomposition.n_components - ext} interior)")
    if plan is not None:
        lines.append(f"support indices I = {plan.I}")
        lines.append(f"adjacency edges F = {[list(e) for e in plan.F]}")
        lines.append(f"adjacency tree E = {[list(e) for e in plan.E]}")
        for e in plan.E:
            p = plan.points[e]
            q = plan.quality[e]
            lines.append(f"  p_{list(e)} = ({p[0]!r}, {p[1]!r})  |f| = {q['abs_f']:.3e}  "
                         f"|grad f| = {q['grad_norm']:.6g}")
    if spec.variant == FULL:
        lines.append("h = f^2 + lam*(x^2 + y^2 - R^2) * prod_e((x - x_e)^2 + (y - y_e)^2 - lam^2)"
                     + ("   (empty product = 1)" if not spec.gluing else ""))
        lines.append(f"H = h - alpha*lam^4 with alpha = {spec.alpha}")
    else:
        lines.append(f"H = f^2 + lam*(x^2 + y^2 - R^2) - alpha*lam^2 with alpha = {spec.alpha}")
    lines.append("X = (H_y + H*H_x, -H_x + H*H_y)")
    led = spec.degree_ledger or degree_ledger(spec)
    lines.append(f"deg f = {led.M}, deg H = {led.deg_H}, deg X = {led.deg_X}")
    lines.append(f"  2(M-1)(M-2)+7 = {led.degree_bound} ({'ok' if led.within_degree_bound else 'exceeded'})")
    lines.append(f"  max(2M, (M-1)(M-2)+2) = {led.h_degree_bound} for deg H "
                 f"({'ok' if led.within_h_bound else 'exceeded'})")
    lines.append(f"  4M-1 = {led.star_degree} ({'equal' if led.star_exact else 'different'})")
    return "\n".join(lines) + "\n"
