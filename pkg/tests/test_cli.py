import json
from fractions import Fraction
from pathlib import Path

import pytest

from limitsets.cli import EXIT_HYPOTHESIS, EXIT_INTERNAL, EXIT_OK, main
from limitsets.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """\
f = x*y
R_squared = 1
lambda_schedule = 1e-1, 1e-2
resolution = 512
support_resolution = 128
cycle_lambda = 1e-2
cycle_seed = 0.5, 0.25
"""


def test_parse_defaults_and_paths(tmp_path):
    cfg = parse_config("f = x*y\nR_squared = 1/2\n", base=tmp_path)
    assert cfg.R_squared == Fraction(1, 2)
    assert cfg.variant == "full" and cfg.alpha == "auto"
    assert cfg.output_dir == tmp_path / "out"
    cfg = parse_config("f = x\nR_squared = 1\noutput_dir = res\n", base=tmp_path)
    assert cfg.output_dir == tmp_path / "res"


def test_gluing_points_parse():
    cfg = parse_config("f = x\nR_squared = 1\ngluing_points = 1, 1/2; -1, -1/2\n")
    assert cfg.gluing_points == [(1, Fraction(1, 2)), (-1, Fraction(-1, 2))]


@pytest.mark.parametrize("text", [
    "R_squared = 1\n",
    "f = x\n",
    "f = x\nR_squared = -1\n",
    "f = x\nR_squared = 1\nvariant = half\n",
    "f = x\nR_squared = 1\nalpha = 3/2\n",
    "f = x\nR_squared = 1\nlambda_schedule = 1e-2, 1e-1\n",
    "f = x\nR_squared = 1\nresolution = 16\n",
    "f = x\nR_squared = 1\ncolour = red\n",
    "f = x\nR_squared = 1\njust words\n",
    "f = x +* y\nR_squared = 1\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.conf"
    p.write_text("f = x\n")
    assert main(["analyze", "--config", str(p)]) == EXIT_INTERNAL
    assert "stage config" in capsys.readouterr().err
    assert main(["analyze", "--config", str(tmp_path / "missing.conf")]) == EXIT_INTERNAL


def test_analyze_circle_fails_hypotheses(tmp_path):
    cfg = load_config(CONFIGS / "circle.conf")
    assert cfg.f_expr == "x^2 + y^2 - 1"
    assert main(["analyze", "--config", str(CONFIGS / "circle.conf"),
                 "--out", str(tmp_path)]) == EXIT_HYPOTHESIS
    report = json.loads((tmp_path / "analysis.json").read_text())
    assert report["hypotheses"]["h4_ok"] is False
    assert report["hypotheses"]["required_ok"] is False


def test_analyze_and_build_example1(tmp_path):
    conf = CONFIGS / "example1.conf"
    assert main(["analyze", "--config", str(conf), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "support.svg").read_text().startswith("<?xml")
    assert main(["build", "--config", str(conf), "--out", str(tmp_path)]) == EXIT_OK
    build = json.loads((tmp_path / "build.json").read_text())
    assert build["family"]["degree_bound_ok"]


def test_trace_command(tmp_path):
    p = tmp_path / "small.conf"
    p.write_text(SMALL)
    assert main(["trace", "--config", str(p), "--lambda", "0.01"]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "trace_0.01.csv").exists() and (out / "levelset_0.01.svg").exists()
    summary = json.loads((out / "trace_0.01.json").read_text())["trace"]
    assert summary["components"] == 1 and not summary["empty"]


def test_verify_small_is_deterministic(tmp_path):
    p = tmp_path / "small.conf"
    p.write_text(SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", str(p), "--out", str(a)]) == EXIT_OK
    assert main(["verify", "--config", str(p), "--out", str(b)]) == EXIT_OK
    for name in ("report.json", "schedule.csv", "schedule.svg", "portrait.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    verdicts = json.loads((a / "report.json").read_text())["verdicts"]
    assert verdicts["all_pass"] and verdicts["seeded_cycle_closed"]
