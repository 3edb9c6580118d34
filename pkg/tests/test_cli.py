import json
import math
import os
import shutil
from pathlib import Path

import pytest

from thermolab.cli import KINDS, main, parse_scenario, run
from thermolab.errors import ParseError, ValidationError
from thermolab.geometry import ClosedFormField

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = sorted((ROOT / "scenarios").glob("*.toml"))
GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("THERMOLAB_REGEN_GOLDEN") == "1"

MINIMAL = """
[metric]
kind = "flat"
"""

ATTRACTOR = """
[metric]
kind = "flat"

[field]
c1 = 0.5
c2 = 0.0

[run]
kind = "lyapunov"
T = 200.0
h = 0.005
"""


# --- parsing --------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_scenario(MINIMAL)
    assert cfg.kind == "orbit"
    assert cfg.run["h"] == 1e-3 and cfg.run["seed"] == 0
    assert cfg.scenario.metric.kind == "flat"
    assert cfg.scenario.field == ClosedFormField()


def test_product_torus_config():
    cfg = parse_scenario(ATTRACTOR)
    fld = cfg.scenario.field
    assert (fld.c1, fld.c2) == (0.5, 0.0) and fld.U.is_zero
    assert cfg.scenario.metric.f.is_zero


def test_unknown_key_names_it():
    with pytest.raises(ParseError) as exc:
        parse_scenario('[metric]\nmetrric = "flat"\n')
    assert "metrric" in str(exc.value)
    assert exc.value.line == 2


def test_unknown_section():
    with pytest.raises(ParseError, match="bogus"):
        parse_scenario("[bogus]\na = 1\n")


def test_json_alternative():
    text = json.dumps({"metric": {"kind": "flat"}, "field": {"c1": 0.5}, "run": {"kind": "lyapunov"}})
    cfg = parse_scenario(text)
    assert cfg.kind == "lyapunov" and cfg.scenario.field.c1 == 0.5


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_scenario("[metric]\nkind = \n")
    assert exc.value.line == 2


@pytest.mark.parametrize(
    "text, field",
    [
        ('[run]\nkind = "spin"\n', "run.kind"),
        ("[run]\nh = -1.0\n", "run.h"),
        ('[run]\nT = "long"\n', "run.T"),
        ("[run]\nseed = 1.5\n", "run.seed"),
        ('[metric]\nkind = "flat"\nf = [[1, 0, 0.1, 0.0]]\n', "metric.f"),
        ("[metric]\nkind = \"conformal\"\nf = [[0.5, 0, 0.1, 0.0]]\n", "metric.f[0].kx"),
        ('[output]\nemit = "xml"\n', "output.emit"),
    ],
)
def test_validation_names_field(text, field):
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text)
    assert exc.value.field == field


def test_every_kind_has_a_scenario():
    kinds = {parse_scenario(p.read_text()).kind for p in SCENARIOS}
    assert kinds == set(KINDS)


# --- running --------------------------------------------------------------


def test_lyapunov_attractor_report(tmp_path):
    rep = run(parse_scenario(ATTRACTOR), tmp_path)
    assert rep.exit_code == 0
    exps = sorted(rep.result["exponents"])
    assert exps == pytest.approx([-0.5, 0.0], abs=1e-2)
    data = json.loads((tmp_path / rep.outputs["report"]).read_text())
    assert data["status"] == "ok" and data["schema"] == "thermolab.report/1"


def test_flat_orbit_csv(tmp_path):
    assert main(["--scenario", str(ROOT / "scenarios/orbit_flat.toml"), "--out", str(tmp_path), "--quiet"]) == 0
    raw = (tmp_path / "orbit_flat_orbit.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    lines = raw.decode().splitlines()
    header = lines[0].split(",")
    assert header[0] == "t"
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    ix, iy = header.index("x"), header.index("y")
    for r in rows:
        assert r[ix] == pytest.approx(0.1 + r[0], abs=1e-12)
        assert r[iy] == pytest.approx(0.2, abs=1e-12)


def test_emit_json_only(tmp_path):
    rc = main(["--scenario", str(ROOT / "scenarios/orbit_flat.toml"), "--out", str(tmp_path),
               "--quiet", "--emit", "json"])
    assert rc == 0
    assert [p.name for p in tmp_path.iterdir()] == ["orbit_flat_report.json"]


def test_exit_code_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[metric]\nmetrric = "flat"\n')
    assert main(["--scenario", str(bad), "--out", str(tmp_path), "--quiet"]) == 1
    assert "metrric" in capsys.readouterr().err
    assert main(["--scenario", str(tmp_path / "missing.toml"), "--quiet"]) == 1


def test_exit_code_numerical_failure(tmp_path, capsys):
    cfg = tmp_path / "coarse.toml"
    cfg.write_text(
        '[metric]\nkind = "conformal"\nf = [[2, 1, 0.4, 0.0]]\n'
        "[field]\nc1 = 1.5\nc2 = 0.5\n"
        '[run]\nkind = "orbit"\nT = 20.0\nh = 0.3\nx = 0.1\ny = 0.1\nangle = 0.3\n'
        '[output]\nprefix = "coarse"\n'
    )
    assert main(["--scenario", str(cfg), "--out", str(tmp_path), "--quiet"]) == 2
    assert "StepTooLarge" in capsys.readouterr().err
    report = json.loads((tmp_path / "coarse_report.json").read_text())
    assert report["status"] == "failed" and report["error"]["type"] == "StepTooLarge"


def test_seed_override(tmp_path):
    path = str(ROOT / "scenarios/franks_constant.toml")
    main(["--scenario", path, "--out", str(tmp_path / "a"), "--quiet", "--seed", "7"])
    report = next((tmp_path / "a").glob("*_report.json"))
    assert json.loads(report.read_text())["seed"] == 7


# --- golden files and determinism -----------------------------------------


def _close(a, b, path="$"):
    if isinstance(a, dict):
        assert isinstance(b, dict) and set(a) == set(b), path
        for k in a:
            _close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) or isinstance(b, float):
        assert isinstance(b, (int, float)) and not isinstance(b, bool), path
        assert math.isclose(a, b, rel_tol=1e-7, abs_tol=1e-9), f"{path}: {a} != {b}"
    else:
        assert a == b, path


@pytest.mark.parametrize("scenario", SCENARIOS, ids=lambda p: p.stem)
def test_golden(scenario, tmp_path):
    assert main(["--scenario", str(scenario), "--out", str(tmp_path), "--quiet", "--emit", "json"]) == 0
    produced = next(tmp_path.glob("*_report.json"))
    golden = GOLDEN / produced.name
    if REGEN:
        GOLDEN.mkdir(exist_ok=True)
        shutil.copy(produced, golden)
    _close(json.loads(produced.read_text()), json.loads(golden.read_text()))


def artifacts_identical(scenario, root: Path) -> bool:
    """Run ``scenario`` twice into separate directories and compare every artifact byte for byte."""
    dirs = [root / "first", root / "second"]
    for d in dirs:
        if main(["--scenario", str(scenario), "--out", str(d), "--quiet", "--seed", "3"]) != 0:
            return False
    names = [sorted(p.name for p in d.iterdir()) for d in dirs]
    if names[0] != names[1] or not names[0]:
        return False
    return all((dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names[0])


@pytest.mark.parametrize("name", ["orbit_flat", "cslab_homothety", "franks_constant"])
def test_determinism(name, tmp_path):
    assert artifacts_identical(ROOT / "scenarios" / f"{name}.toml", tmp_path)
