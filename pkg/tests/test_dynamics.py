import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from limitsets.dynamics import (CAPTURE_TOL, Field, NoConvergenceToCycle, integrate,
                                locate_cycle, monotonicity_check)


@pytest.fixture(scope="module")
def fld1(ex1):
    return Field(ex1, 1e-2)


def test_equilibrium_stays_put(fld1):
    tr = integrate(fld1, 1e-2, (0.0, 0.0), "forward", 10.0)
    assert tr.stop_reason == "equilibrium"
    assert np.array_equal(tr.xy, [[0.0, 0.0]])


def test_bad_arguments(fld1):
    with pytest.raises(ValueError):
        integrate(fld1, 1e-2, (0.5, 0.5), "sideways")
    with pytest.raises(ValueError):
        integrate(fld1, 1e-2, (math.nan, 0.5))


def test_identity_pointwise(fld1):
    # X(H) = H |∇H|² at random points
    rng = np.random.default_rng(3)
    for x, y in rng.uniform(-1.5, 1.5, size=(50, 2)):
        gx, gy = fld1.grad(x, y)
        lhs = fld1._p(x, y) * gx + fld1._q(x, y) * gy
        rhs = fld1.h(x, y) * (gx * gx + gy * gy)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-13)


def test_positive_H_increases_forward(fld1):
    p0 = (math.sqrt(2.0), 0.0)  # H = λ(x² − 1) = 0.01
    assert fld1.h(*p0) == pytest.approx(0.01)
    tr = integrate(fld1, 1e-2, p0, "forward", 5.0)
    assert tr.H[-1] > tr.H[0]
    assert monotonicity_check(tr)
    assert np.all(np.diff(tr.H) >= -1e-12)


def test_backward_shrinks_to_capture(fld1):
    tr = integrate(fld1, 1e-2, (0.5, 0.25), "backward", 1e4, stop_abs_H=CAPTURE_TOL)
    assert tr.stop_reason == "captured"
    assert abs(tr.H[-1]) <= CAPTURE_TOL * 1.0001
    assert tr.t[-1] < 0
    assert monotonicity_check(tr)


def test_escape_stop(fld1):
    tr = integrate(fld1, 1e-2, (0.5, 0.25), "forward", 1e4, escape_abs_H=0.5)
    assert tr.stop_reason == "escaped"
    assert abs(tr.H[-1]) == pytest.approx(0.5, rel=1e-6)


def test_monotonicity_check_detects_violations():
    from limitsets.dynamics import Trajectory
    up = Trajectory(np.arange(3.0), np.zeros((3, 2)), np.array([0.1, 0.2, 0.15]),
                    "forward", "t_max")
    flip = Trajectory(np.arange(2.0), np.zeros((2, 2)), np.array([0.1, -0.1]),
                      "forward", "t_max")
    assert not monotonicity_check(up)
    assert not monotonicity_check(flip)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.4, 1.4), st.floats(-1.4, 1.4), st.sampled_from(["forward", "backward"]))
def test_discrete_dH_sign_matches_H(fld1, x, y, direction):
    h = fld1.h(x, y)
    if abs(h) < 1e-6:
        return
    tr = integrate(fld1, 1e-2, (x, y), direction, 2.0, stop_abs_H=1e-9, escape_abs_H=10.0)
    assert monotonicity_check(tr)
    dH = np.diff(tr.H)
    s = np.sign(h) * (1 if direction == "forward" else -1)
    assert np.all(s * dH >= -1e-10)


def test_halving_tolerance_agrees(fld1):
    a = integrate(fld1, 1e-2, (0.7, 0.2), "backward", 3.0, rtol=1e-8, atol=1e-11)
    b = integrate(fld1, 1e-2, (0.7, 0.2), "backward", 3.0, rtol=5e-9, atol=5e-12)
    assert np.hypot(*(a.xy[-1] - b.xy[-1])) < 1e-6


def test_locate_cycle_example1(ex1, fld1):
    c = locate_cycle(ex1, 1e-2, (0.5, 0.25), fld=fld1)
    assert c.closed
    assert c.max_abs_H < 1e-8
    assert c.period > 0
    # repelling on both sides
    assert c.side_growth["plus"]["growth"] > 1 and c.side_growth["minus"]["growth"] > 1


def test_seed_at_equilibrium_raises(ex1, fld1):
    with pytest.raises(NoConvergenceToCycle):
        locate_cycle(ex1, 1e-2, (0.0, 0.0), fld=fld1)


def test_trajectory_csv(fld1):
    tr = integrate(fld1, 1e-2, (0.5, 0.25), "forward", 0.1)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x,y,H" and len(lines) == len(tr.t) + 1
