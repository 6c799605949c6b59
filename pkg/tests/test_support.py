import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from limitsets.poly import PlanarPoly, parse
from limitsets.support import (DisconnectedAdjacencyGraph, NoExteriorComponent,
                               analyze_support, build_support, decompose,
                               distance_to_component, spanning_tree)

SEXTIC = "x*y*(x+1)*(x-1)*(y+1)*(y-1)"


def test_cross_has_only_exterior_regions():
    dec, sup, plan = analyze_support(parse("x*y"), 1, 256)
    assert dec.n_components == 4 and all(dec.exterior)
    assert sup.I == [0] and plan.F == [] and plan.E == []


def test_sextic_support_and_tree():
    dec, sup, plan = analyze_support(parse(SEXTIC), 3, 256)
    assert dec.n_components == 16 and sum(dec.exterior) == 12
    assert sup.I == [0, 1, 2, 3, 4]
    assert plan.E == [(0, 1), (0, 2), (0, 3), (0, 4)]
    # each interior square touches the outside and two other squares
    assert len(plan.F) == 8 and all((0, k) in plan.F for k in range(1, 5))
    f = PlanarPoly.from_polynomial(parse(SEXTIC))
    fx, fy = f.diff("x"), f.diff("y")
    for e, (px, py) in plan.points.items():
        assert abs(f(px, py)) < 1e-12
        assert math.hypot(fx(px, py), fy(px, py)) > 1e-6
        # on the shared boundary: close to both regions
        for k in e:
            assert distance_to_component(sup, k, (px, py)) < 2 * dec.lattice.h


def test_concentric_circles():
    f = parse("(x^2 + y^2 - 1/4)*(x^2 + y^2 - 9/16)")
    dec, sup, plan = analyze_support(f, 1, 256)
    assert sup.I == [0, 1, 2] or sup.I == [0, 1]
    assert plan.E and plan.E[0][0] == 0


def test_no_exterior_component():
    dec = decompose(parse("x*y"), Fraction(1), 128)
    dec.exterior = [False] * dec.n_components
    with pytest.raises(NoExteriorComponent):
        build_support(dec)


def test_spanning_tree_disconnected():
    with pytest.raises(DisconnectedAdjacencyGraph):
        spanning_tree([0, 1, 2], [(0, 1)])


def test_spanning_tree_bfs_order():
    F = [(0, 2), (1, 2), (2, 3), (0, 1)]
    assert spanning_tree([0, 1, 2, 3], F) == [(0, 1), (0, 2), (2, 3)]


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(1, 12))
    edges = set()
    for v in range(1, n):
        edges.add((draw(st.integers(0, v - 1)), v))
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=15))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return list(range(n)), sorted(edges)


@given(connected_graphs())
@settings(max_examples=100, deadline=None)
def test_spanning_tree_properties(g):
    I, F = g
    E = spanning_tree(I, F)
    assert len(E) == len(I) - 1 and set(E) <= set(F)
    # tree edges connect everything
    parent = {i: i for i in I}

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i
    for a, b in E:
        ra, rb = find(a), find(b)
        assert ra != rb
        parent[ra] = rb
    assert len({find(i) for i in I}) == 1


def test_plan_json():
    import json
    _, _, plan = analyze_support(parse(SEXTIC), 3, 256)
    doc = json.loads(plan.to_json())
    assert doc["tree_edges"] == [[0, 1], [0, 2], [0, 3], [0, 4]]
    assert len(doc["gluing_points"]) == 4
