import csv
import json
import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esrsim import cli, fom, scenefile, touchstone
from esrsim.errors import ParseError, SingularSystem, UnknownUnit, ValidationError
from esrsim.scene import FieldSample
from esrsim.units import format_frequency, format_length, parse_frequency, parse_length

SCENES = os.path.join(os.path.dirname(__file__), os.pardir, "scenes")
CPS = os.path.join(SCENES, "cps_m1_bare.json")


def _coarse_scene(tmp_path, src=CPS):
    with open(src) as fh:
        doc = json.load(fh)
    doc.setdefault("settings", {})["discretization"] = {
        "brick_subdivision": [2, 2], "segments_per_brick": 2, "panel_fine": "20nm", "panel_coarse": "400nm",
        "panel_grading": 0.2}
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    return str(path)


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- scene files

def test_preset_file_expands():
    doc = scenefile.load(CPS)
    assert len(doc.scene.conductors) == 3
    assert len(doc.scene.ports) == 1
    assert len(doc.scene.all_probe_points()) >= 1


@pytest.mark.parametrize("name", sorted(os.listdir(SCENES)))
def test_scene_round_trip(name):
    doc = scenefile.load(os.path.join(SCENES, name))
    text = scenefile.dumps(doc)
    again = scenefile.loads(text)
    assert again.scene == doc.scene
    assert (again.line, again.access, again.settings) == (doc.line, doc.access, doc.settings)
    assert scenefile.dumps(again) == text


def test_unitless_length_rejected():
    with open(CPS) as fh:
        doc = json.load(fh)
    doc["line"]["length"] = "200"
    with pytest.raises(UnknownUnit):
        scenefile.document_from_dict(doc)
    doc["line"]["length"] = 200
    with pytest.raises(ValidationError):
        scenefile.document_from_dict(doc)


def test_unknown_key_rejected():
    with open(CPS) as fh:
        doc = json.load(fh)
    doc["colour"] = "blue"
    with pytest.raises(ValidationError):
        scenefile.document_from_dict(doc)


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        scenefile.loads('{\n  "materials": [\n  oops\n}')
    d = info.value.to_dict()
    assert d["line"] == 3 and d["column"] == 3


@given(st.floats(1e-12, 1.0))
def test_length_format_round_trip(v):
    assert parse_length(format_length(v)) == v


@given(st.floats(1.0, 1e12))
def test_frequency_format_round_trip(v):
    assert parse_frequency(format_frequency(v)) == v


def test_length_units():
    assert parse_length("200nm") == 200 * 1e-9
    assert parse_length("1.5um") == 1.5e-6
    assert parse_length("2mm") == 2e-3
    for bad in ("200", "200 furlongs", "nm", 200):
        with pytest.raises(UnknownUnit):
            parse_length(bad)


# ---------------------------------------------------------------- touchstone

cplx = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


@given(st.lists(cplx, min_size=1, max_size=30))
def test_touchstone_s1p_round_trip(vals):
    f = np.linspace(1e8, 2e10, len(vals))
    text = touchstone.format_touchstone(f, np.array(vals), 50.0, ["test"])
    f2, s2, z0 = touchstone.parse_touchstone(text)
    assert z0 == 50.0
    np.testing.assert_allclose(f2, f, rtol=1e-9)
    np.testing.assert_allclose(s2, vals, rtol=1e-9, atol=1e-9 * max(1e-300, np.max(np.abs(vals))))


@given(st.lists(st.tuples(cplx, cplx, cplx, cplx), min_size=1, max_size=10))
def test_touchstone_s2p_round_trip(vals):
    s = np.array([[[a, b], [c, d]] for a, b, c, d in vals])
    f = np.arange(1, len(vals) + 1) * 1e9
    f2, s2, _ = touchstone.parse_touchstone(touchstone.format_touchstone(f, s), nports=2)
    np.testing.assert_allclose(s2, s, rtol=1e-9, atol=1e-9)


def test_abcd_s_conversion_inverse():
    abcd = np.array([[1.2 + 0.1j, 30 + 5j], [0.002j, 0.9 - 0.05j]])
    abcd[1, 0] = (abcd[0, 0] * abcd[1, 1] - 1) / abcd[0, 1]
    np.testing.assert_allclose(touchstone.s_to_abcd(touchstone.abcd_to_s(abcd)), abcd, rtol=1e-12)


# ---------------------------------------------------------------- field maps

def _sample(k):
    return FieldSample((k * 1e-7, 0.0, 5e-9), (1e-3 * k, 0, 1j * 1e-4), (10.0, -2j, 0), "q")


def test_field_map_rows(tmp_path):
    path = tmp_path / "f.csv"
    cli.emit_field_map([_sample(1), _sample(2)], str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].split(",") == list(fom.FIELD_COLUMNS)
    assert lines[1].split(",")[3] == "1.000000000e-03"


def test_empty_field_map_writes_nothing(tmp_path):
    path = tmp_path / "f.csv"
    with pytest.raises(ValidationError):
        cli.emit_field_map([], str(path))
    assert not path.exists()


def test_freq_spec():
    assert cli.parse_freq_spec("10GHz").tolist() == [1e10]
    f = cli.parse_freq_spec("100MHz:20GHz:101")
    assert len(f) == 101 and f[0] == 1e8 and f[-1] == 2e10
    for bad in ("1:2", "2GHz:1GHz:5", "1GHz:2GHz:x"):
        with pytest.raises(ValidationError):
            cli.parse_freq_spec(bad)


# ---------------------------------------------------------------- commands

def test_validate(capsys):
    code, out, _ = _run(capsys, "validate", "--scene", CPS)
    assert code == 0
    info = json.loads(out)
    assert info["status"] == "ok" and info["conductors"] == 3


def test_sweep_touchstone(tmp_path, capsys):
    code, _, err = _run(capsys, "sweep", "--scene", CPS, "--out", tmp_path, "--temp", 4, "--freq", "100MHz:20GHz:101")
    assert code == 0, err
    text = (tmp_path / "sweep.s1p").read_text()
    assert "# Hz S RI R 50" in text.splitlines()
    rows = [ln for ln in text.splitlines() if ln and ln[0] not in "!#"]
    assert len(rows) == 101
    f, s, _ = touchstone.read_touchstone(str(tmp_path / "sweep.s1p"))
    assert f[0] == 1e8 and f[-1] == 2e10 and np.all(np.abs(s) <= 1)
    with open(tmp_path / "resistance.csv") as fh:
        assert len(list(csv.reader(fh))) == 102


def test_zero_power_solve(tmp_path, capsys):
    scene = _coarse_scene(tmp_path)
    code, _, err = _run(capsys, "solve", "--scene", scene, "--out", tmp_path / "o", "--pin=-inf")
    assert code == 0, err
    with open(tmp_path / "o" / "fields.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) > 1
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[3:])
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["avg_B"] == 0.0 and rep["ratio_infinite"] is True


def test_solve_map_and_plots(tmp_path, capsys):
    scene = _coarse_scene(tmp_path)
    code, _, err = _run(capsys, "solve", "--scene", scene, "--out", tmp_path / "o", "--map", "6:5", "--plot")
    assert code == 0, err
    names = set(os.listdir(tmp_path / "o"))
    assert {"fields.csv", "report.json", "report.txt", "field_map.csv", "field_map_B.png", "probes.png"} <= names
    with open(tmp_path / "o" / "field_map.csv") as fh:
        rows = list(csv.reader(fh))
    assert 1 < len(rows) <= 31
    assert all(math.isfinite(float(v)) for r in rows[1:] for v in r)


def test_compare_config_table(tmp_path, capsys):
    scene = _coarse_scene(tmp_path)
    code, _, err = _run(capsys, "compare", "--scene", scene, "--out", tmp_path / "o", "--study", "config",
                        "--drive", "current")
    assert code == 0, err
    with open(tmp_path / "o" / "compare_config.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["label"] for r in rows] == ["CPS", "CPW", "CPW_TO_CPS"]
    ref = next(r for r in rows if r["label"] == "CPW_TO_CPS")
    assert all(float(ref[c + "_norm"]) == 1.0 for c in fom.COLUMNS)


def test_exit_code_validation(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    code, _, err = _run(capsys, "validate", "--scene", bad)
    assert code == 2
    assert json.loads(err)["error"] == "ParseError"
    code, _, err = _run(capsys, "solve", "--scene", CPS)
    assert code == 2 and len(err.strip().splitlines()) == 1
    doc = json.loads(open(CPS).read())
    doc.pop("access")
    no_access = tmp_path / "no_access.json"
    no_access.write_text(json.dumps(doc))
    code, _, err = _run(capsys, "deembed", "--scene", no_access, "--out", tmp_path / "d")
    assert code == 2 and json.loads(err)["entity"] == "access"


def test_exit_code_io(tmp_path, capsys):
    code, _, err = _run(capsys, "validate", "--scene", tmp_path / "missing.json")
    assert code == 4 and json.loads(err)["error"] == "IoError"
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = _run(capsys, "sweep", "--scene", CPS, "--out", blocker / "sub", "--freq", "1GHz")
    assert code == 4


def test_exit_code_solver(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise SingularSystem("potential matrix is not positive definite")

    monkeypatch.setattr(fom, "run_device", boom)
    code, _, err = _run(capsys, "solve", "--scene", CPS, "--out", tmp_path)
    assert code == 3 and json.loads(err)["error"] == "SingularSystem"
