"""Flat ``key = value`` job configuration."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .poly import Polynomial, parse, parse_rational


class ConfigError(ValueError):
    pass


@dataclass
class JobConfig:
    f_expr: str
    R_squared: Fraction
    variant: str = "full"
    alpha: str = "auto"
    lambda_schedule: list[float] = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    resolution: int = 2048
    seed: int = 0
    output_dir: Path = Path("out")
    support_resolution: int = 256
    gluing_points: list[tuple[Fraction, Fraction]] | None = None
    probe_radius: float = 0.05
    probe_lambda: float | None = None
    cycle_lambda: float | None = None
    cycle_seed: tuple[float, float] | None = None
    cycles: bool = True

    @property
    def f(self) -> Polynomial:
        return parse(self.f_expr)

    @property
    def alpha_value(self) -> Fraction:
        return Fraction(0) if self.alpha == "auto" else parse_rational(self.alpha)

    def as_dict(self) -> dict:
        return {
            "f": self.f_expr, "R_squared": str(self.R_squared), "variant": self.variant,
            "alpha": self.alpha, "lambda_schedule": self.lambda_schedule,
            "resolution": self.resolution, "seed": self.seed,
            "support_resolution": self.support_resolution,
            "gluing_points": None if self.gluing_points is None else
            [[str(a), str(b)] for a, b in self.gluing_points],
            "probe_radius": self.probe_radius, "probe_lambda": self.probe_lambda,
            "cycle_lambda": self.cycle_lambda,
            "cycle_seed": list(self.cycle_seed) if self.cycle_seed else None,
            "cycles": self.cycles,
        }


_KEYS = {"f", "R_squared", "variant", "alpha", "lambda_schedule", "resolution", "seed",
         "output_dir", "support_resolution", "gluing_points", "probe_radius",
         "probe_lambda", "cycle_lambda", "cycle_seed", "cycles"}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_config(text: str, base: Path | None = None) -> JobConfig:
    raw: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _KEYS:
            raise ConfigError(f"line {n}: unknown key {k!r}")
        raw[k] = v
    for k in ("f", "R_squared"):
        if k not in raw:
            raise ConfigError(f"missing required key {k!r}")
    try:
        parse(raw["f"])
    except Exception as exc:
        raise ConfigError(f"f: {exc}") from exc
    cfg = JobConfig(raw["f"], parse_rational(raw["R_squared"]))
    if cfg.R_squared <= 0:
        raise ConfigError("R_squared must be positive")
    if "variant" in raw:
        cfg.variant = raw["variant"]
        if cfg.variant not in ("full", "star"):
            raise ConfigError("variant must be full or star")
    if "alpha" in raw:
        cfg.alpha = raw["alpha"]
        if cfg.alpha != "auto":
            a = parse_rational(cfg.alpha)
            if not 0 <= a <= 1:
                raise ConfigError("alpha must lie in [0, 1]")
    if "lambda_schedule" in raw:
        cfg.lambda_schedule = _floats(raw["lambda_schedule"])
    lams = cfg.lambda_schedule
    if not lams or any(v <= 0 for v in lams) or any(b >= a for a, b in zip(lams, lams[1:])):
        raise ConfigError("lambda_schedule must be positive and strictly decreasing")
    for k in ("resolution", "seed", "support_resolution"):
        if k in raw:
            setattr(cfg, k, int(raw[k]))
    if not 64 <= cfg.resolution <= 8192:
        raise ConfigError("resolution must lie in [64, 8192]")
    if "output_dir" in raw:
        p = Path(raw["output_dir"])
        cfg.output_dir = p if p.is_absolute() or base is None else base / p
    elif base is not None:
        cfg.output_dir = base / "out"
    if "gluing_points" in raw:
        pts = []
        for item in raw["gluing_points"].split(";"):
            if item.strip():
                a, b = item.split(",")
                pts.append((parse_rational(a.strip()), parse_rational(b.strip())))
        cfg.gluing_points = pts
    for k in ("probe_radius", "probe_lambda", "cycle_lambda"):
        if k in raw:
            setattr(cfg, k, float(raw[k]))
    if "cycle_seed" in raw:
        a, b = _floats(raw["cycle_seed"])
        cfg.cycle_seed = (a, b)
    if "cycles" in raw:
        cfg.cycles = raw["cycles"].lower() in ("1", "yes", "true", "on")
    return cfg


def load_config(path: str | Path) -> JobConfig:
    path = Path(path)
    return parse_config(path.read_text(), base=path.parent)
