import csv
import json

import jsonschema
import numpy as np
import pytest
import yaml

from hfcrit import checks, cli
from hfcrit.integrals import IntegralTables, random_tables, save_fcidump

HE_LIKE = {
    "system": {"nuclei": [{"z": 2, "xyz": [0, 0, 0]}], "n_electrons": 2},
    "basis": {"builtin": "he_like_diffuse_s14", "atom": 0},
}
HYDROGEN = {
    "system": {"nuclei": [{"z": 1, "xyz": [0, 0, 0]}], "n_electrons": 1},
    "basis": {"builtin": "hydrogenic_s10"},
}


def write_config(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def strip_times(record):
    record = dict(record)
    record.pop("timestamps")
    return record


def test_single_orbital_fcidump(tmp_path):
    t = IntegralTables(np.eye(1), -np.eye(1), np.zeros((1, 1, 1, 1)))
    dump = tmp_path / "one.fcidump"
    save_fcidump(t, dump, n_electrons=1)
    code, rec = cli.run(["fci", "--fcidump", str(dump), "--out", str(tmp_path / "o")])
    assert code == 0
    assert rec["results"]["eigenvalues"] == [-1.0]
    stored = json.loads((tmp_path / "o" / "fci.json").read_text())
    jsonschema.validate(stored, cli.RESULT_SCHEMA)
    assert stored["status"] == "ok"


def test_clipped_spectrum_exits_with_warning(tmp_path):
    t = IntegralTables(np.eye(1), -np.eye(1), np.zeros((1, 1, 1, 1)))
    dump = tmp_path / "one.fcidump"
    save_fcidump(t, dump, n_electrons=1)
    code, rec = cli.run(["fci", "--fcidump", str(dump), "--K", "3", "--out", str(tmp_path)])
    assert code == 2
    assert rec["status"] == "warning" and rec["warnings"]


def test_check_passes_on_hydrogen(tmp_path):
    cfg = write_config(tmp_path / "h.yaml", {"task": "check", **HYDROGEN, "out": str(tmp_path / "o")})
    code, rec = cli.run(["check", cfg])
    assert code == 0
    assert rec["results"]["failing"] == []
    names = {r["name"] for r in rec["results"]["invariants"]}
    assert {"oracle_equivalence", "eri_permutation_symmetry", "sphere_exactness"} <= names


def test_check_on_fcidump(tmp_path):
    dump = tmp_path / "r.fcidump"
    save_fcidump(random_tables(5, seed=41), dump, n_electrons=2)
    code, rec = cli.run(["check", "--fcidump", str(dump), "--out", str(tmp_path)])
    assert code == 0, rec["results"]["failing"]


def test_corrupted_eri_is_reported():
    t = random_tables(5, seed=42)
    eri = t.eri.copy()
    eri[0, 1, 2, 3] += 1e-3
    bad = t.replace(eri=eri)
    failing = checks.failing(checks.run_invariant_suite(bad, 2, n_random=5))
    assert "eri_permutation_symmetry" in failing


def test_bounds_writes_curve(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(tmp_path / "he.yaml", {"task": "bounds", **HE_LIKE, "params": {"k": 2, "R": [10, 20, 40, 80, 160]}})
    code, rec = cli.run(["bounds", cfg, "--out", str(out)])
    assert code in (0, 2)
    rows = list(csv.reader((out / "bounds_curve.csv").open()))
    assert rows[0] == ["R", "base_energy", "lambda_max", "bound"]
    assert [float(r[0]) for r in rows[1:]] == [10, 20, 40, 80, 160]
    assert all(rec["results"]["fci_below_bound"])
    assert "fit" in rec["results"]["far"]


def test_reproducible_records(tmp_path):
    cfg = write_config(tmp_path / "he.yaml", {"task": "ground", **HE_LIKE})
    _, a = cli.run(["ground", cfg, "--out", str(tmp_path / "a")])
    _, b = cli.run(["ground", cfg, "--out", str(tmp_path / "a")])
    assert json.dumps(strip_times(a), sort_keys=True) == json.dumps(strip_times(b), sort_keys=True)


def test_excited_task(tmp_path):
    cfg = write_config(tmp_path / "he.yaml", {"task": "excited", **HE_LIKE, "params": {"guess": [0, 3]}})
    code, rec = cli.run(["excited", cfg, "--out", str(tmp_path)])
    assert code == 0
    res = rec["results"]
    assert res["ground_energy"] < res["point"]["energy"] < res["threshold_energy"]
    assert res["diagnostics"]["morse_index"] == 1


@pytest.mark.parametrize(
    "data,key",
    [
        ({"task": "ground", "system": {"nuclei": [{"z": 1}]}, "basis": {"builtin": "hydrogenic_s10"}}, "system.nuclei[0].xyz"),
        ({"task": "bounds", **HYDROGEN}, "params.k"),
        ({"task": "ground", **HYDROGEN, "basis": {"builtin": "nope"}}, "basis.builtin"),
        ({"task": "excited", **HYDROGEN}, "params.guess"),
    ],
)
def test_configuration_errors_name_the_key(tmp_path, data, key):
    cfg = write_config(tmp_path / "bad.yaml", data)
    code, rec = cli.run([data["task"], cfg, "--out", str(tmp_path)])
    assert code == 1
    assert rec["status"] == "error" and key in rec["error"]
    jsonschema.validate(json.loads((tmp_path / f"{data['task']}.json").read_text()), cli.RESULT_SCHEMA)


def test_two_integral_sources_rejected(tmp_path):
    cfg = write_config(tmp_path / "bad.yaml", {"task": "fci", **HYDROGEN, "fcidump": "x"})
    code, rec = cli.run(["fci", cfg, "--out", str(tmp_path)])
    assert code == 1 and "exactly one" in rec["error"]


def test_main_entry_point(tmp_path, capsys):
    cfg = write_config(tmp_path / "h.yaml", {"task": "chain", **HYDROGEN})
    assert cli.main(["chain", cfg, "--out", str(tmp_path)]) == 0
    assert "chain.json" in capsys.readouterr().out
