"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``CRITERION n PASS|FAIL`` line (also repeated in the
terminal summary) before asserting, so a failing criterion still reports its
measured numbers.
"""
import random
import time
from pathlib import Path

import numpy as np
import pytest

from limitsets.cli import main
from limitsets.dynamics import (CAPTURE_TOL, Field, cycle_census, integrate, locate_cycle,
                                monotonicity_check)
from limitsets.family import (build_field, build_H, check_degree_bound, build_family,
                              identity_residual, verify_identity)
from limitsets.levelset import (convergence_schedule, gluing_probe, raster_component_count,
                                regularity_check, trace_levelset)
from limitsets.poly import parse
from limitsets.variety import extract_gamma

from conftest import ACCEPTANCE_LINES, PAPER_GLUING, SEXTIC
from test_family import _random_H, eq1_rhs

SCHEDULE = [1e-1, 1e-2, 1e-3, 1e-4]
RES = 2048


def record(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n} {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def traces_1e4(ex2, ex3):
    return {"ex2": trace_levelset(ex2, 1e-4, RES), "ex3": trace_levelset(ex3, 1e-4, RES)}


def test_criterion_1_example1_construction():
    t = time.perf_counter()
    H = build_H(parse("x*y"), 1, (), 0)
    P, Q = build_field(H)
    p1, q1 = eq1_rhs()
    dt = time.perf_counter() - t
    ok_H = H == parse("x^2*y^2 + lam*(x^2 + y^2 - 1)")
    ok_X = P == 2 * p1 and Q == 2 * q1
    record(1, ok_H and ok_X and dt < 1.0,
           f"H exact={ok_H} field=2*rhs exact={ok_X} time={dt:.3f}s")


def test_criterion_2_identity(ex1, ex2, ex3):
    t = time.perf_counter()
    examples = {k: verify_identity(s, indeterminate=True).ok
                for k, s in (("ex1", ex1), ("ex2", ex2), ("ex3", ex3))}
    rng = random.Random(2)
    random_ok = 0
    for _ in range(200):
        H = _random_H(rng)
        P, Q = build_field(H)
        random_ok += identity_residual(H, P, Q, "direct").is_zero()
    dt = time.perf_counter() - t
    record(2, all(examples.values()) and random_ok == 200 and dt < 30,
           f"examples={examples} random={random_ok}/200 time={dt:.1f}s")


def test_criterion_3_degree_ledger():
    t = time.perf_counter()
    l1 = check_degree_bound(build_family(parse("x*y"), 1))
    l2 = check_degree_bound(build_family(parse(SEXTIC), 3, PAPER_GLUING))
    s2 = check_degree_bound(build_family(parse("x*y"), 1, variant="star"))
    s6 = check_degree_bound(build_family(parse(SEXTIC), 3, variant="star"))
    dt = time.perf_counter() - t
    ok = (l1.deg_X == 7 == l1.degree_bound and l1.M == 2
          and l2.deg_X == 23 and l2.degree_bound == 47 and l2.deg_X <= l2.degree_bound
          and s2.deg_X == 4 * 2 - 1 and s6.deg_X == 4 * 6 - 1 and dt < 10)
    record(3, ok, f"xy degX={l1.deg_X} bound={l1.degree_bound}; sextic degX={l2.deg_X} "
                  f"bound={l2.degree_bound}; star M=2 degX={s2.deg_X}, M=6 degX={s6.deg_X}; "
                  f"time={dt:.1f}s")


def test_criterion_4_component_counts(ex2, ex3, traces_1e4):
    t = time.perf_counter()
    n2, n3 = traces_1e4["ex2"].n_components, traces_1e4["ex3"].n_components
    o2 = raster_component_count(ex2, 1e-4, 2 * RES)
    o3 = raster_component_count(ex3, 1e-4, 2 * RES)
    dt = time.perf_counter() - t
    record(4, n2 == 1 == o2 and n3 == 5 == o3,
           f"full={n2} (oracle {o2}) star={n3} (oracle {o3}) oracle time={dt:.0f}s")


def test_criterion_5_hausdorff_convergence(ex1, ex2):
    t = time.perf_counter()
    out, ok = [], True
    for name, spec, f, R2 in (("ex1", ex1, "x*y", 1), ("ex2", ex2, SEXTIC, 3)):
        gamma = extract_gamma(parse(f), R2, RES)
        table = convergence_schedule(spec, SCHEDULE, RES, gamma)
        d = [r.d_hausdorff for r in table.rows]
        ok &= table.strictly_decreasing and d[-1] < 0.05
        out.append(f"{name} d_H=[{', '.join(f'{v:.4f}' for v in d)}] "
                   f"decreasing={table.strictly_decreasing} final<0.05={d[-1] < 0.05}")
    dt = time.perf_counter() - t
    record(5, ok and dt < 600, "; ".join(out) + f" time={dt:.0f}s")


def test_criterion_6_regularity(ex1, ex2):
    t = time.perf_counter()
    out, ok = [], True
    for name, spec in (("ex1", ex1), ("ex2", ex2)):
        res = regularity_check(spec, SCHEDULE, RES)
        ok &= res.ok
        worst = min(res.min_grad_norms.values())
        out.append(f"{name} ok={res.ok} alphas={len(res.alpha_history)} "
                   f"min|grad H|={worst:.3e} failing={res.failing}")
    stress = build_family(parse("x^2"), 1)
    with pytest.warns(UserWarning):
        sres = regularity_check(stress, [1e-7], 1024)
    out.append(f"stress x^2 resampled {len(sres.alpha_history)} alphas, no crash")
    dt = time.perf_counter() - t
    record(6, ok and dt < 300, "; ".join(out) + f" time={dt:.0f}s")


def test_criterion_7_local_probes(ex2):
    t = time.perf_counter()
    glue = [gluing_probe(ex2, (float(a), float(b)), 1e-4, 0.05).arcs for a, b in PAPER_GLUING]
    gamma = extract_gamma(parse(SEXTIC), 3, 256)
    bnd = [gluing_probe(ex2, p, 1e-4, 0.05).arcs for p in gamma.boundary_points]
    dt = time.perf_counter() - t
    ok = glue == [2] * 4 and len(bnd) == 12 and all(a == 1 for a in bnd) and dt < 120
    record(7, ok, f"gluing arcs={glue} boundary arcs={bnd} time={dt:.0f}s")


def test_criterion_8_dynamics(ex1, ex3, traces_1e4):
    t = time.perf_counter()
    fld = Field(ex1, 1e-2)
    back = integrate(fld, 1e-2, (0.5, 0.25), "backward", 1e6, stop_abs_H=CAPTURE_TOL / 2)
    landed = back.stop_reason == "captured" and abs(back.H[-1]) < 1e-10
    cyc = locate_cycle(ex1, 1e-2, (0.5, 0.25), fld=fld)
    rng = np.random.default_rng(8)
    mono = 0
    for x, y in rng.uniform(-1.2, 1.2, size=(20, 2)):
        direction = "forward" if rng.random() < 0.5 else "backward"
        tr = integrate(fld, 1e-2, (x, y), direction, 5.0, stop_abs_H=1e-9, escape_abs_H=10.0)
        mono += monotonicity_check(tr)
    cycles = cycle_census(ex3, 1e-4, traces_1e4["ex3"])
    dt = time.perf_counter() - t
    ok = landed and cyc.closed and mono == 20 and len(cycles) == 5 and dt < 600
    record(8, ok, f"landed |H|={abs(back.H[-1]):.1e} closure={cyc.return_displacement:.1e} "
                  f"(tol {cyc.closure_tol:.0e}) monotone={mono}/20 star cycles={len(cycles)} "
                  f"time={dt:.0f}s")


def test_criterion_9_determinism(tmp_path):
    conf = Path(__file__).resolve().parent.parent / "configs" / "example1.conf"
    a, b = tmp_path / "a", tmp_path / "b"
    ca = main(["verify", "--config", str(conf), "--out", str(a)])
    cb = main(["verify", "--config", str(conf), "--out", str(b)])
    same = (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    record(9, same and ca == cb, f"exit codes {ca},{cb} report.json identical={same}")
