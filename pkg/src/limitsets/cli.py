"""Command line: ``limitsets analyze|build|trace|verify|render --config FILE``.

Exit codes: 0 all checks pass, 2 hypothesis failure, 3 verification
finding, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import render
from .config import ConfigError, JobConfig, load_config
from .family import (DegreeBoundViolated, FamilySpec, build_family, check_degree_bound,
                     transcript, verify_identity)
from .levelset import (convergence_schedule, gluing_probe, regularity_check,
                       trace_levelset)
from .support import analyze_support, gamma_components
from .variety import check_hypotheses, extract_gamma

log = logging.getLogger("limitsets")

EXIT_OK, EXIT_HYPOTHESIS, EXIT_FINDING, EXIT_INTERNAL = 0, 2, 3, 4


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage {stage}: {type(exc).__name__}: {exc}")
        self.stage = stage


class HypothesisFailure(RuntimeError):
    pass


@dataclass
class Context:
    cfg: JobConfig
    out: Path
    report: dict = field(default_factory=dict)
    gamma: object = None
    decomposition: object = None
    support: object = None
    plan: object = None
    spec: FamilySpec | None = None

    def write(self, name: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        p.write_text(text)
        return p


def _stage(name):
    def deco(fn):
        def run(ctx, *a, **kw):
            log.info("stage %s", name)
            try:
                return fn(ctx, *a, **kw)
            except (HypothesisFailure, StageError):
                raise
            except Exception as exc:  # surfaced with the stage name
                raise StageError(name, exc) from exc
        return run
    return deco


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return repr(o)
    if hasattr(o, "to_dict"):
        return o.to_dict()
    if isinstance(o, Path):
        return str(o)
    return str(o)


def _clean(o):
    """Replace non-finite floats (not valid JSON) by strings."""
    if isinstance(o, float):
        return o if math.isfinite(o) else repr(o)
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

@_stage("analyze")
def stage_analyze(ctx: Context) -> dict:
    cfg = ctx.cfg
    f = cfg.f
    ctx.gamma = extract_gamma(f, cfg.R_squared, cfg.resolution)
    hyp = check_hypotheses(f, cfg.R_squared, ctx.gamma)
    out = {"hypotheses": hyp.to_dict()}
    ctx.write("gamma.csv", ctx.gamma.to_csv())
    needed = hyp.all_ok if cfg.variant == "full" else hyp.weak_ok
    out["hypotheses"]["required_ok"] = needed
    ctx.report.update(out)
    if not needed:
        raise HypothesisFailure("input hypotheses fail; see witnesses")
    dec, sup, plan = analyze_support(f, cfg.R_squared, cfg.support_resolution)
    ctx.decomposition, ctx.support, ctx.plan = dec, sup, plan
    ext = sum(dec.exterior)
    out["support"] = {
        "regions": dec.n_components, "exterior_regions": ext,
        "indices": sup.I, "adjacency_edges": [list(e) for e in plan.F],
        "tree_edges": [list(e) for e in plan.E],
        "gluing_points": [{"edge": list(e), "x": plan.points[e][0], "y": plan.points[e][1],
                           "abs_f": plan.quality[e]["abs_f"],
                           "grad_norm": plan.quality[e]["grad_norm"],
                           "abs_f_tol": 1e-12} for e in plan.E],
        "gamma_components": gamma_components(dec),
        "resolution": cfg.support_resolution,
    }
    ctx.write("support.json", plan.to_json() + "\n")
    ctx.report.update(out)
    return out


def _gluing(ctx: Context):
    if ctx.cfg.variant == "star":
        return []
    if ctx.cfg.gluing_points is not None:
        return list(ctx.cfg.gluing_points)
    return [ctx.plan.points[e] for e in ctx.plan.E]


@_stage("build")
def stage_build(ctx: Context) -> FamilySpec:
    cfg = ctx.cfg
    spec = build_family(cfg.f, cfg.R_squared, _gluing(ctx), cfg.alpha_value, cfg.variant)
    ctx.spec = spec
    fam = {"degree_ledger": spec.degree_ledger.to_dict(), "alpha": str(spec.alpha),
           "gluing_points": [[str(x), str(y)] for x, y in spec.gluing]}
    try:
        check_degree_bound(spec)
        fam["degree_bound_ok"] = True
    except DegreeBoundViolated as exc:
        fam["degree_bound_ok"] = False
        fam["degree_bound_message"] = str(exc)
    ctx.report["family"] = fam
    ctx.write("family.json", spec.to_json() + "\n")
    ctx.write("transcript.txt", transcript(spec, ctx.plan, ctx.decomposition))
    return spec


@_stage("identity")
def stage_identity(ctx: Context) -> dict:
    numeric = verify_identity(ctx.spec)
    symbolic = verify_identity(ctx.spec, indeterminate=True)
    out = {"numeric": numeric.to_dict(), "indeterminate": symbolic.to_dict()}
    ctx.report["family"]["identity"] = out
    return out


@_stage("schedule")
def stage_schedule(ctx: Context):
    cfg = ctx.cfg
    attempts = 8 if cfg.alpha == "auto" else 1
    reg = regularity_check(ctx.spec, cfg.lambda_schedule, cfg.resolution, seed=cfg.seed,
                           max_attempts=attempts)
    ctx.spec = reg.spec
    ctx.report["regularity"] = reg.to_dict()
    ctx.report["family"]["alpha_final"] = str(reg.spec.alpha)
    table = convergence_schedule(ctx.spec, cfg.lambda_schedule, cfg.resolution, ctx.gamma)
    ctx.report["schedule"] = table.to_dict()
    ctx.report["schedule"]["hausdorff_tol_note"] = "exact over vertex samples"
    ctx.write("schedule.csv", _schedule_csv(table))
    for tr in table.traces:
        ctx.write(f"trace_{tr.lam:g}.csv", tr.to_csv())
    ctx.report["traces"] = [tr.summary() for tr in table.traces]
    return table


def _schedule_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "d_H", "d_trace_to_gamma", "d_gamma_to_trace", "components",
                "min_grad_norm", "vertices"])
    for r in table.rows:
        w.writerow([repr(r.lam), repr(r.d_hausdorff), repr(r.d_trace_to_gamma),
                    repr(r.d_gamma_to_trace), r.components, repr(r.min_grad_norm), r.vertices])
    return buf.getvalue()


@_stage("probes")
def stage_probes(ctx: Context) -> list:
    cfg = ctx.cfg
    lam = cfg.probe_lambda or cfg.lambda_schedule[-1]
    probes = []
    for x, y in ctx.spec.gluing:
        r = gluing_probe(ctx.spec, (float(x), float(y)), lam, cfg.probe_radius)
        probes.append({"kind": "gluing", "expected": 2, **r.to_dict(), "lambda": lam})
    for p in ctx.gamma.boundary_points:
        r = gluing_probe(ctx.spec, p, lam, cfg.probe_radius)
        probes.append({"kind": "boundary", "expected": 1, **r.to_dict(), "lambda": lam})
    ctx.report["probes"] = probes
    return probes


@_stage("cycles")
def stage_cycles(ctx: Context, table) -> dict:
    from .dynamics import cycle_census, locate_cycle
    cfg = ctx.cfg
    lam = cfg.cycle_lambda or cfg.lambda_schedule[-1]
    trace = next((t for t in table.traces if t.lam == lam), None) or \
        trace_levelset(ctx.spec, lam, cfg.resolution)
    out = {"lambda": lam, "trace_components": trace.n_components}
    cycles = cycle_census(ctx.spec, lam, trace)
    out["census"] = [c.to_dict() for c in cycles]
    out["distinct_cycles"] = len(cycles)
    if cfg.cycle_seed is not None:
        c = locate_cycle(ctx.spec, lam, cfg.cycle_seed)
        out["seeded"] = {"seed": list(cfg.cycle_seed), **c.to_dict()}
        cycles = cycles + [c]
    ctx.report["cycles"] = out
    render.render_portrait(ctx.out / "portrait.svg", trace, cycles, R=math.sqrt(cfg.R_squared))
    return out


def verdicts(ctx: Context) -> dict:
    rep = ctx.report
    cfg = ctx.cfg
    v = {}
    fam = rep.get("family", {})
    if "identity" in fam:
        v["identity"] = fam["identity"]["numeric"]["ok"] and fam["identity"]["indeterminate"]["ok"]
    if "degree_bound_ok" in fam:
        v["degree_bound"] = fam["degree_bound_ok"]
    if "schedule" in rep:
        rows = rep["schedule"]["rows"]
        v["hausdorff_decreasing"] = rep["schedule"]["d_H_strictly_decreasing"]
        v["regular"] = rep["regularity"]["ok"]
        last = rows[-1]["components"]
        if cfg.variant == "full":
            want = rep["support"]["gamma_components"]
            v["components_match_gamma"] = last == want
        v["components_final"] = last
    if "probes" in rep:
        v["probes"] = all(p["arcs"] == p["expected"] for p in rep["probes"])
    if "cycles" in rep:
        c = rep["cycles"]
        v["cycles_match_components"] = c["distinct_cycles"] == c["trace_components"]
        v["cycles_closed"] = all(x["closed"] and x["max_abs_H"] < x["cycle_H_tol"]
                                 for x in c["census"])
        if "seeded" in c:
            v["seeded_cycle_closed"] = c["seeded"]["closed"]
    checks = [val for k, val in v.items() if isinstance(val, bool)]
    v["all_pass"] = all(checks)
    return v


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _context(cfg: JobConfig, out: str | None) -> Context:
    ctx = Context(cfg, Path(out) if out else cfg.output_dir)
    ctx.report["config"] = cfg.as_dict()
    return ctx


def _finish(ctx: Context, name: str = "report.json") -> None:
    ctx.write(name, _json(_clean(ctx.report)))


def cmd_analyze(cfg, out=None) -> int:
    ctx = _context(cfg, out)
    try:
        stage_analyze(ctx)
    except HypothesisFailure:
        _finish(ctx, "analysis.json")
        return EXIT_HYPOTHESIS
    render.render_support(ctx.out / "support.svg", ctx.gamma, ctx.support, ctx.plan)
    _finish(ctx, "analysis.json")
    return EXIT_OK


def cmd_build(cfg, out=None) -> int:
    ctx = _context(cfg, out)
    try:
        stage_analyze(ctx)
    except HypothesisFailure:
        _finish(ctx, "analysis.json")
        return EXIT_HYPOTHESIS
    stage_build(ctx)
    stage_identity(ctx)
    _finish(ctx, "build.json")
    ok = ctx.report["family"]["degree_bound_ok"] and \
        ctx.report["family"]["identity"]["indeterminate"]["ok"]
    return EXIT_OK if ok else EXIT_FINDING


def cmd_trace(cfg, lam=None, out=None) -> int:
    ctx = _context(cfg, out)
    try:
        stage_analyze(ctx)
    except HypothesisFailure:
        _finish(ctx, "analysis.json")
        return EXIT_HYPOTHESIS
    stage_build(ctx)
    lam = float(lam) if lam is not None else cfg.lambda_schedule[-1]
    tr = trace_levelset(ctx.spec, lam, cfg.resolution)
    ctx.write(f"trace_{lam:g}.csv", tr.to_csv())
    ctx.report["trace"] = tr.summary()
    render.render_levelset(ctx.out / f"levelset_{lam:g}.svg", tr, ctx.gamma, ctx.spec.gluing,
                           R=math.sqrt(cfg.R_squared))
    _finish(ctx, f"trace_{lam:g}.json")
    return EXIT_OK if not tr.empty else EXIT_FINDING


def cmd_verify(cfg, out=None) -> int:
    ctx = _context(cfg, out)
    try:
        stage_analyze(ctx)
    except HypothesisFailure:
        ctx.report["verdicts"] = {"all_pass": False, "hypotheses": False}
        _finish(ctx)
        return EXIT_HYPOTHESIS
    stage_build(ctx)
    stage_identity(ctx)
    table = stage_schedule(ctx)
    stage_probes(ctx)
    if cfg.cycles:
        stage_cycles(ctx, table)
    ctx.report["verdicts"] = verdicts(ctx)
    _render_all(ctx, table)
    _finish(ctx)
    return EXIT_OK if ctx.report["verdicts"]["all_pass"] else EXIT_FINDING


def _render_all(ctx: Context, table) -> None:
    R = math.sqrt(ctx.cfg.R_squared)
    render.render_support(ctx.out / "support.svg", ctx.gamma, ctx.support, ctx.plan)
    for tr in table.traces:
        render.render_levelset(ctx.out / f"levelset_{tr.lam:g}.svg", tr, ctx.gamma,
                               ctx.spec.gluing, R=R)
    render.render_schedule(ctx.out / "schedule.svg", table)


def cmd_render(cfg, out=None) -> int:
    ctx = _context(cfg, out)
    try:
        stage_analyze(ctx)
    except HypothesisFailure:
        _finish(ctx, "analysis.json")
        return EXIT_HYPOTHESIS
    stage_build(ctx)
    table = convergence_schedule(ctx.spec, cfg.lambda_schedule, cfg.resolution, ctx.gamma)
    ctx.write("schedule.csv", _schedule_csv(table))
    _render_all(ctx, table)
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="limitsets", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["analyze", "build", "trace", "verify", "render"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--lambda", dest="lam", type=float)
    ap.add_argument("--out")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError, ValueError) as exc:
        print(f"stage config: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    try:
        if args.command == "trace":
            return cmd_trace(cfg, args.lam, args.out)
        return {"analyze": cmd_analyze, "build": cmd_build, "verify": cmd_verify,
                "render": cmd_render}[args.command](cfg, args.out)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
