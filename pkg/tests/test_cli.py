import json
import subprocess
import sys

import pytest

from sobstab.cli import RunConfig, SpecError, load_function_spec, main, run
from sobstab.quad import CylFunction, RadialFunction, ZonalFunction


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_spectral_gap_json(capsys):
    assert main(["spectral-gap", "--d", "5", "--lmax", "20"]) == 0
    out = _json(capsys)
    assert out["pass"] and out["residual"][0] == 0.0 and out["ell"][-1] == 20
    assert out["anchors"]


def test_spectral_gap_csv_and_manifest(tmp_path):
    target = tmp_path / "gap.csv"
    assert main(["spectral-gap", "--lmax", "6", "--format", "csv", "--out", str(target)]) == 0
    lines = target.read_text().splitlines()
    assert lines[0] == "ell,residual" and len(lines) == 6
    man = json.loads((tmp_path / "gap.csv.manifest.json").read_text())
    assert man["config"]["lmax"] == 6 and "numpy" in man and "timestamp" not in man


def test_output_is_deterministic(capsys):
    main(["constants", "--d", "6"])
    a = capsys.readouterr().out
    main(["constants", "--d", "6"])
    assert capsys.readouterr().out == a
    assert "beta" in json.loads(a)["ledger"]


def test_local_check(capsys):
    assert main(["local-check", "--d", "6"]) == 0
    assert _json(capsys)["margin"] >= 0


def test_deficit_of_optimizer_preset(capsys):
    assert main(["deficit", "--preset", "gstar", "--d", "4"]) == 0
    out = _json(capsys)
    assert abs(out["deficit"]) < 1e-2 * out["energy"]


def test_flow_steiner(capsys):
    assert main(["flow-steiner", "--seed", "3"]) == 0
    assert _json(capsys)["end_matches_rearrangement"]


@pytest.mark.parametrize("argv", [["deficit", "--d", "2"], ["deficit", "--eps0", "0.5"],
                                  ["deficit", "--spec", "/nonexistent/spec.json"],
                                  ["deficit", "--spec", '{"kind": "radial", "d": 3, "grid": {}}']])
def test_input_errors_exit_two(argv, capsys):
    assert main(argv) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "input"


def test_spec_loader_kinds(tmp_path):
    r = load_function_spec({"kind": "radial", "d": 3,
                            "grid": {"nodes": [0.0, 0.5, 1.0, 2.0]}, "values": [1.0, 0.8, 0.5, 0.2]})
    assert isinstance(r, RadialFunction)
    p = tmp_path / "f.json"
    p.write_text(json.dumps({"preset": "two_bumps", "d": 3}))
    assert isinstance(load_function_spec(str(p)), CylFunction)
    assert isinstance(load_function_spec(str(p), sphere=True), ZonalFunction)
    with pytest.raises(SpecError) as e:
        load_function_spec({"kind": "radial", "d": 3, "grid": {"nodes": "x"}, "values": [1]})
    assert e.value.pointer.startswith("/grid")
    with pytest.raises(SpecError):
        load_function_spec({"preset": "nope"})
    g = load_function_spec('{"kind": "gauss", "N": 2, "amps": [1.0], "exps": [[0.1, 0.2]]}')
    assert g.N == 2


def test_run_config_validation():
    with pytest.raises(SpecError):
        RunConfig("bogus").validate()
    assert run(RunConfig("spectral-gap", d=3, lmax=4, format="csv")) == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sobstab", "spectral-gap", "--lmax", "3"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["pass"]
