import json
import subprocess
import sys

import pytest

from pqkit import cli


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


PROPO = {
    "name": "propo",
    "structure": {"generator": "propo", "m": 2},
    "samples": {"count": 3},
    "checks": [
        "admissible_basis_check",
        "pde_residual",
        "lemma_pe_check",
        {"name": "quaternionicity_witness", "expect": "fail"},
    ],
}


def test_propo_scenario(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = cli.main(["run", "--scenario", str(write(tmp_path, PROPO)), "--out", str(out)])
    assert code == cli.EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["schema"] == cli.SCHEMA and rep["status"] == "pass"
    assert [c["check"] for c in rep["checks"]] == ["admissible_basis_check", "pde_residual",
                                                   "lemma_pe_check", "quaternionicity_witness"]
    witness = rep["checks"][-1]
    assert witness["ok"] and witness["report"]["verdict"] == "fail"
    assert "status: pass" in capsys.readouterr().out


def test_unexpected_pass_is_failure(tmp_path):
    doc = {"structure": {"generator": "flat"}, "samples": {"count": 2},
           "checks": [{"name": "quaternionicity_witness", "expect": "fail"}]}
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc))]) == cli.EXIT_FAIL


def test_output_is_deterministic(tmp_path):
    doc = dict(PROPO, checks=["pde_residual", "obata_torsion"])
    path = write(tmp_path, doc)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(["run", "--scenario", str(path), "--out", str(a), "--jobs", "2"])
    cli.main(["run", "--scenario", str(path), "--out", str(b)])
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    ra.pop("created"), rb.pop("created")
    assert ra == rb


def test_seed_override_changes_samples(tmp_path):
    path = write(tmp_path, dict(PROPO, checks=["pde_residual"]))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(["run", "--scenario", str(path), "--out", str(a)])
    cli.main(["run", "--scenario", str(path), "--out", str(b), "--seed", "9"])
    assert json.loads(a.read_text())["samples"] != json.loads(b.read_text())["samples"]


@pytest.mark.parametrize("doc", [
    {"structure": {"generator": "flat"}, "checks": ["no_such_check"]},
    {"structure": {"generator": "flat"}, "checks": []},
    {"structure": {"generator": "flat"}, "checks": ["pde_residual"], "extra": 1},
    {"structure": {"generator": "flat"}, "checks": [{"name": "pde_residual", "expect": "maybe"}]},
    {"structure": {"generator": "flat"}, "checks": ["pde_residual"], "tol": -1},
    {"structure": {"generator": "nope"}, "checks": ["pde_residual"]},
    {"checks": ["pde_residual"]},
])
def test_invalid_scenarios(tmp_path, doc, capsys):
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc))]) == cli.EXIT_INVALID
    assert "pqkit: error" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert cli.main(["run", "--scenario", str(tmp_path / "absent.json")]) == cli.EXIT_INVALID


def test_singular_sample_rejected(tmp_path):
    doc = dict(PROPO, samples={"points": [[1, 1, 1, 1, 1, 0, 1, 1]]}, checks=["pde_residual"])
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc))]) == cli.EXIT_INVALID


def test_empty_box_is_rejected(tmp_path):
    doc = {"structure": {"generator": "random", "seed": 1}, "samples": {"count": 2, "low": 2.0, "high": 1.0},
           "checks": ["pde_residual"]}
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc))]) == cli.EXIT_INVALID


def test_box_on_singular_locus_is_reported(tmp_path, capsys):
    doc = dict(PROPO, samples={"count": 2, "low": -1e-9, "high": 1e-9}, checks=["pde_residual"])
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc))]) == cli.EXIT_INVALID
    assert "hypothesis region empty" in capsys.readouterr().err


def test_pde_check_needs_diagonal_block(tmp_path):
    doc = {"structure": {"generator": "random", "seed": 1}, "samples": {"count": 1}, "checks": ["pde_residual"]}
    out = tmp_path / "r.json"
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc)), "--out", str(out)]) == cli.EXIT_FAIL
    assert json.loads(out.read_text())["checks"][0]["report"]["verdict"] == "error"


def test_check_error_marks_failure(tmp_path):
    doc = {"structure": {"generator": "random", "seed": 1}, "samples": {"count": 1},
           "checks": [{"name": "is_integrable", "params": {"bogus": 1}}]}
    out = tmp_path / "r.json"
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc)), "--out", str(out)]) == cli.EXIT_FAIL
    assert json.loads(out.read_text())["checks"][0]["report"]["verdict"] == "error"


def test_generate_then_load(tmp_path):
    struct = tmp_path / "H.json"
    assert cli.main(["generate", "diffeo", "--seed", "3", "--out", str(struct)]) == cli.EXIT_OK
    doc = {"structure": {"file": "H.json"}, "samples": {"count": 2},
           "checks": ["admissible_basis_check", "quaternionicity_witness"], "output": "out.json"}
    assert cli.main(["run", "--scenario", str(write(tmp_path, doc))]) == cli.EXIT_OK
    assert (tmp_path / "out.json").exists()


def test_generate_rejects_bad_options(tmp_path):
    assert cli.main(["generate", "flat", "--seed", "1", "--out", str(tmp_path / "x.json")]) == cli.EXIT_INVALID
    assert cli.main(["generate", "flat", "--h", "h_id", "--out", str(tmp_path / "x.json")]) == cli.EXIT_INVALID


def test_write_atomic_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "file.json"
    cli.write_atomic(target, "{}")
    cli.write_atomic(target, "[]")
    assert target.read_text() == "[]"
    assert [p.name for p in target.parent.iterdir()] == ["file.json"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pqkit", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("pqkit ")
