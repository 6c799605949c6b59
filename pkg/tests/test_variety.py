import math
from fractions import Fraction

import numpy as np
import pytest

from limitsets.poly import PlanarPoly, parse
from limitsets.variety import (EmptyGamma, ceil_sqrt, check_hypotheses, extract_gamma,
                               find_boundary_points, find_singular_points, transversality)

SEXTIC = "x*y*(x+1)*(x-1)*(y+1)*(y-1)"


@pytest.mark.parametrize("r2,k", [(1, 1), (3, 2), (4, 2), (Fraction(1, 4), 1), (10, 4)])
def test_ceil_sqrt(r2, k):
    assert ceil_sqrt(r2) == k


def test_cross_trace():
    g = extract_gamma(parse("x*y"), 1, 256)
    assert len(g.arcs) == 4
    assert g.singular_points == [(0.0, 0.0)] or np.allclose(g.singular_points, [(0, 0)])
    assert np.allclose(sorted(g.boundary_points), [(-1, 0), (0, -1), (0, 1), (1, 0)], atol=1e-14)
    res = np.concatenate(g.residuals)
    assert res.max() < 1e-12
    pts = g.points()
    assert np.all(pts[:, 0] ** 2 + pts[:, 1] ** 2 <= 1 + 1e-12)


def test_sextic_singular_points():
    sing, _ = find_singular_points(parse(SEXTIC), Fraction(3), 512)
    want = {(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)}
    got = {(round(p[0]), round(p[1])) for p in sing}
    assert got == want
    assert all(abs(p[0] - round(p[0])) < 1e-9 and abs(p[1] - round(p[1])) < 1e-9 for p in sing)


def test_sextic_boundary_points():
    pts, degenerate = find_boundary_points(parse(SEXTIC), Fraction(3), 512)
    assert not degenerate and len(pts) == 12
    f = PlanarPoly.from_polynomial(parse(SEXTIC))
    assert max(abs(f(*p)) for p in pts) < 1e-12


def test_hypotheses_pass_on_examples():
    for s, r2 in [("x*y", 1), (SEXTIC, 3)]:
        g = extract_gamma(parse(s), r2, 256)
        assert check_hypotheses(parse(s), r2, g).all_ok


def test_tangent_circle_fails_transversality():
    f = parse("x^2 + y^2 - 1")
    g = extract_gamma(f, 1, 256)
    rep = check_hypotheses(f, 1, g)
    assert rep.h1_ok and rep.h2_ok and rep.h3_ok and not rep.h4_ok
    assert rep.witnesses["h4"]["boundary_degenerate"]


def test_tangent_line_fails_transversality():
    f = parse("y - 1")
    g = extract_gamma(f, 1, 256)
    rep = check_hypotheses(f, 1, g)
    assert not rep.h4_ok
    assert abs(transversality(f, (0.0, 1.0))) == 0.0


def test_nonisolated_singularities_fail():
    # a doubled line: every point of Z(f) is singular
    f = parse("(x - 1/3)^2")
    g = extract_gamma(f, 1, 128)
    assert not check_hypotheses(f, 1, g).h3_ok


def test_empty_gamma():
    with pytest.raises(EmptyGamma):
        extract_gamma(parse("x^2 + y^2 + 1"), 1, 128)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        extract_gamma(parse("x"), 1, 32)
    with pytest.raises(ValueError):
        extract_gamma(parse("0"), 1, 128)


def test_csv_rows():
    g = extract_gamma(parse("x*y"), 1, 128)
    lines = g.to_csv().splitlines()
    assert lines[0] == "x,y,abs_f,arc_id"
    assert len(lines) - 1 == sum(len(a) for a in g.arcs)
