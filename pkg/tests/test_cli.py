import json

import numpy as np
import pytest

from hdclt import cli


def run_cli(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_materializes_defaults():
    cfg = cli.validate_config({"theorem": "P32"}, "constants")
    assert cfg["seed"] == 0 and cfg["C0"] == 716.0 and cfg["theta_policy"] == "numeric"


def test_validate_aggregates_errors():
    with pytest.raises(cli.ConfigError) as exc:
        cli.validate_config({"reps": -5, "family.base": "cauchy", "bogus": 1, "seed": -1}, "simulate-delta")
    msgs = exc.value.errors
    assert any(m.startswith("reps:") for m in msgs)
    assert any(m.startswith("family.base:") for m in msgs)
    assert any(m.startswith("bogus:") for m in msgs)
    assert any(m.startswith("seed:") for m in msgs)


def test_t35_message():
    with pytest.raises(cli.ConfigError) as exc:
        cli.validate_config({"theorem": "T35", "m": 2, "tau": 1}, "constants")
    assert any("Fix m ≥ 1 and τ ≥ m" in m for m in exc.value.errors)


def test_config_error_exit_code_and_record(capsys):
    code, out, err = run_cli(["simulate-delta", "--reps", "-3"], capsys)
    assert code == 2 and out == ""
    rec = json.loads(err)
    assert rec["error"]["type"] == "config" and any("reps" in m for m in rec["error"]["messages"])


def test_budget_exit_code(capsys):
    code, _, err = run_cli(["simulate-delta", "--n", "4096", "--p", "1024", "--reps", "2000000"], capsys)
    assert code == 3 and json.loads(err)["error"]["type"] == "budget"


def test_constants_json(capsys):
    code, out, _ = run_cli(["constants", "--theorem", "P32", "--p", "1", "--n", "64", "--C0", "1", "--json",
                            "--set", "pm.nu={\"3\": 1.0}", "--set", "phi_ac0=1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["seed"] == 0
    assert doc["bundle"]["total"] == 4.0 + 2.0**-63


def test_ini_and_json_config(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("seed = 3\nn = 64\n[family]\nbase = rademacher\n[cov]\nkind = identity\n")
    raw = cli.load_config(ini)
    assert raw == {"seed": 3, "n": 64, "family.base": "rademacher", "cov.kind": "identity"}
    js = tmp_path / "run.json"
    js.write_text(json.dumps({"seed": 4, "family": {"base": "laplace"}}))
    assert cli.load_config(js) == {"seed": 4, "family.base": "laplace"}


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("argv", [
    ["simulate-delta", "--family", "laplace", "--p", "4", "--n", "32", "--reps", "20000", "--seed", "5"],
    ["empproc", "--n-list", "[16, 64]", "--reps", "5000", "--xi-dist", "student_t3"],
    ["anticonc", "--cov", "equicorrelated", "--rho", "0.5", "--p", "8", "--reps", "20000"],
])
def test_determinism_across_workers(argv, tmp_path, capsys):
    a, b = tmp_path / "w1", tmp_path / "w8"
    assert cli.main(argv + ["--workers", "1", "--out", str(a)]) == 0
    assert cli.main(argv + ["--workers", "8", "--out", str(b)]) == 0
    capsys.readouterr()
    assert _files(a) == _files(b)


def test_rerun_from_summary(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["lindeberg", "--family", "rademacher", "--p", "2", "--n", "16", "--k-list", "[0, 8, 16]", "--r", "1.5",
            "--reps", "5000", "--seed", "11"]
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(["lindeberg", "--config", str(a / "lindeberg.json"), "--out", str(b)]) == 0
    capsys.readouterr()
    assert _files(a) == _files(b)


def test_posi_command(tmp_path, capsys):
    design = tmp_path / "ortho2.csv"
    np.savetxt(design, np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]]), delimiter=",", fmt="%d")
    code, out, _ = run_cli(["posi", "--design", str(design), "--k", "2", "--alpha", "0.05", "--reps", "200000", "--json"],
                           capsys)
    assert code == 0
    s = json.loads(out)
    assert abs(s["quantiles"]["0.05"] - 2.2365) <= 0.02
    assert s["kappa"] == 0.0 and s["n_models"] == 3


def test_smoothmax_check_csv(capsys):
    code, out, _ = run_cli(["smoothmax-check", "--p", "4", "--set", "samples=100", "--set", "pairs=500"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("schema_version,")
    assert all(line.split(",")[0] == "1" for line in lines[1:])
