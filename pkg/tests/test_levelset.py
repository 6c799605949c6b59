import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from limitsets.family import build_family
from limitsets.levelset import (EmptyInput, PersistentIrregularity, convergence_schedule,
                                directed_hausdorff, directed_hausdorff_brute, gluing_probe,
                                hausdorff, planar_H, raster_component_count,
                                regularity_check, residual_tol, trace_levelset)
from limitsets.poly import parse
from limitsets.variety import extract_gamma, find_boundary_points


# --- Hausdorff --------------------------------------------------------------

def test_hausdorff_single_points():
    assert hausdorff([(0, 0)], [(3, 4)]) == 5.0
    assert hausdorff([(0, 0)], [(3, 4)], method="brute") == 5.0


def test_hausdorff_is_asymmetric_in_directed_form():
    A = [(0, 0)]
    B = [(0, 0), (10, 0)]
    assert directed_hausdorff(A, B) == 0.0
    assert directed_hausdorff(B, A) == 10.0
    assert hausdorff(A, B) == 10.0


def test_hausdorff_empty_input():
    with pytest.raises(EmptyInput):
        hausdorff([], [(1, 1)])
    with pytest.raises(EmptyInput):
        directed_hausdorff_brute([(1, 1)], np.zeros((0, 2)))


def test_tree_matches_brute_on_1000_points():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(1000, 2))
    B = rng.uniform(-2, 2, size=(1000, 2))
    assert abs(hausdorff(A, B) - hausdorff(A, B, method="brute")) < 1e-12


pts = st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=40)


@settings(max_examples=80, deadline=None)
@given(pts, pts)
def test_tree_matches_brute_property(A, B):
    assert math.isclose(directed_hausdorff(A, B), directed_hausdorff_brute(A, B),
                        rel_tol=0, abs_tol=1e-12)


@settings(max_examples=60, deadline=None)
@given(pts, pts, pts)
def test_hausdorff_metric_axioms(A, B, C):
    dab = hausdorff(A, B)
    assert dab == hausdorff(B, A)
    assert hausdorff(A, A) == 0.0
    assert hausdorff(A, C) <= dab + hausdorff(B, C) + 1e-9


# --- tracing ----------------------------------------------------------------

@pytest.fixture(scope="module")
def ex1_trace(ex1):
    return trace_levelset(ex1, 1e-2, 1024)


def test_rejects_nonpositive_lambda(ex1):
    with pytest.raises(ValueError):
        trace_levelset(ex1, 0.0)


def test_residuals_below_tolerance(ex1_trace):
    assert ex1_trace.max_residual() < ex1_trace.tol
    assert ex1_trace.open_ends == 0


def test_bounding_radius_within_window(ex1, ex1_trace):
    # G_λ sits inside the disk of radius 2R̂
    assert ex1_trace.bounding_radius <= 2.0
    assert ex1_trace.window == 2.0


def test_example1_min_grad_near_two_lambda(ex1_trace):
    # the closest approach of G_λ to the crossing is where |∇H| = 2λ
    assert ex1_trace.min_grad_norm > 1e-6
    assert ex1_trace.min_grad_norm == pytest.approx(2e-2, rel=0.05)


def test_refinement_changes_trace_by_less_than_four_cells(ex1):
    a = trace_levelset(ex1, 1e-2, 512)
    b = trace_levelset(ex1, 1e-2, 1024)
    assert hausdorff(a.points(), b.points()) < 4 * a.cell * 4
    assert a.n_components == b.n_components


def test_csv_roundtrip_header(ex1_trace):
    text = ex1_trace.to_csv()
    assert text.splitlines()[0] == "x,y,abs_H,component,polyline"
    assert len(text.splitlines()) == len(ex1_trace.points()) + 1


def test_components_match_raster_oracle(ex1, ex1_trace):
    assert ex1_trace.n_components == raster_component_count(ex1, 1e-2, 2048)


def test_concentric_circles():
    spec = build_family(parse("(x^2 + y^2 - 1/4)*(x^2 + y^2 - 1)"), 2)
    tr = trace_levelset(spec, 0.1, 512)
    assert not tr.empty
    assert tr.max_residual() < tr.tol
    assert tr.n_components == raster_component_count(spec, 0.1, 1024)


def test_residual_tol_scales_with_coefficients(ex2):
    fn = planar_H(ex2, 1e-2)
    assert residual_tol(1e-2, fn) >= 1e-10


def test_low_lambda_warns_at_low_resolution(ex1):
    with pytest.warns(UserWarning):
        trace_levelset(ex1, 1e-5, 256)


# --- schedule and regularity ------------------------------------------------

def test_schedule_example1_decreasing(ex1):
    gamma = extract_gamma(parse("x*y"), 1, 512)
    table = convergence_schedule(ex1, [1e-1, 1e-2, 1e-3], 1024, gamma)
    assert table.strictly_decreasing
    # near the crossing G_λ approaches the hyperbola xy = ±√λ as λ → 0
    assert table.rows[-1].d_hausdorff == pytest.approx(math.sqrt(2) * 1e-3 ** 0.25, rel=0.02)


def test_schedule_rejects_bad_lists(ex1):
    with pytest.raises(ValueError):
        convergence_schedule(ex1, [1e-2, 1e-1])
    with pytest.raises(ValueError):
        convergence_schedule(ex1, [1e-2, -1.0])


def test_empty_schedule_is_fine(ex1):
    table = convergence_schedule(ex1, [], 256, np.array([[0.0, 0.0]]))
    assert table.rows == [] and table.strictly_decreasing


def test_regularity_example1_passes_first_alpha(ex1):
    res = regularity_check(ex1, [1e-1, 1e-2], 512)
    assert res.ok and res.alpha_history == [0]


def test_stress_case_exercises_resampling():
    spec = build_family(parse("x^2"), 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = regularity_check(spec, [1e-7], 512, max_attempts=3)
    assert not res.ok and res.persistent
    assert len(res.alpha_history) == 3
    assert len(set(res.alpha_history)) == 3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(PersistentIrregularity):
            regularity_check(spec, [1e-7], 512, max_attempts=2, strict=True)


# --- probes -----------------------------------------------------------------

def test_probe_at_a_crossing_sees_two_branches(ex1):
    # at the origin the two hyperbola branches pass at distance ~ √(2√λ)
    r = gluing_probe(ex1, (0, 0), 1e-2, radius=0.6)
    assert r.arcs == 4


def test_probe_at_gluing_point(ex2):
    r = gluing_probe(ex2, (1, 0.5), 1e-3)
    assert r.arcs == 2


def test_probe_at_boundary_point(ex2):
    pts, dense = find_boundary_points(parse("x*y*(x+1)*(x-1)*(y+1)*(y-1)"), 3, 256)
    assert not dense and len(pts) == 12
    for p in pts[:3]:
        assert gluing_probe(ex2, p, 1e-3).arcs == 1


def test_probe_away_from_curve_is_empty(ex1):
    assert gluing_probe(ex1, (0.5, 0.5), 1e-2, radius=0.05).arcs == 0
