import json
import subprocess
import sys

import pytest

from weilint.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_info_U6(capsys):
    code, out, _ = run(capsys, "info", "--symbol", "U(6)")
    assert code == 0
    obj = json.loads(out)
    assert (obj["order"], obj["level"], obj["signature"]) == (36, 6, 0)
    assert obj["schema_version"] == 1


def test_invariants_U6_all_methods(capsys):
    code, out, _ = run(capsys, "invariants", "--symbol", "U(6)", "--method", "all")
    assert code == 0
    obj = json.loads(out)
    assert obj["dim_kernel"] == obj["dim_frobenius"] == obj["dim_formula"] == 4
    assert obj["agreement"] and obj["rational"]


def test_basis_verify_3(capsys):
    code, out, _ = run(capsys, "basis", "--symbol", "3^+1", "--verify")
    assert code == 0
    assert json.loads(out)["verification"]["verdict"] is True


def test_form_alias_and_input_file(capsys, tmp_path):
    code, out, _ = run(capsys, "build", "--form", "2_1^+1 ⊕ 3^-1")
    assert code == 0
    path = tmp_path / "form.json"
    path.write_text(out, encoding="utf-8")
    code2, out2, _ = run(capsys, "info", "--input", str(path))
    assert code2 == 0
    assert json.loads(out2)["order"] == 6


@pytest.mark.parametrize("argv", [
    ["info", "--symbol", "nonsense"],
    ["info"],
    ["info", "--symbol", "3^+1", "--input", "x.json"],
    ["info", "--input", "/nonexistent/form.json"],
    ["rep", "--symbol", "3^+1", "--word", "S Q"],
    ["rep", "--symbol", "U(12)", "--word", "S", "--max-order", "100"],
    ["decompose", "--symbol", "U(2)"],
])
def test_invalid_input_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("weil ")


def test_rep_matrix_shape(capsys):
    code, out, _ = run(capsys, "rep", "--symbol", "3^+1", "--word", "S T")
    assert code == 0
    obj = json.loads(out)
    assert obj["word"] == "S T"
    assert len(obj["matrix"]) == 3 and len(obj["index"]) == 3


def test_verify_exit_0(capsys):
    code, out, _ = run(capsys, "verify", "--symbol", "2_II^-2 ⊕ 3^+1")
    assert code == 0
    assert all(json.loads(out)["checks"].values())


def test_decompose_cyclic(capsys):
    code, out, _ = run(capsys, "decompose", "--symbol", "9^+1")
    assert code == 0
    obj = json.loads(out)
    assert obj["total_dimension"] == 9


def test_pretty_and_out(capsys, tmp_path):
    target = tmp_path / "info.txt"
    code, out, _ = run(capsys, "info", "--symbol", "U(2)", "--pretty", "--out", str(target))
    assert code == 0 and out == ""
    text = target.read_text(encoding="utf-8")
    assert "order: 4" in text


def test_emit_basis(capsys, tmp_path):
    target = tmp_path / "basis.json"
    code, _, _ = run(capsys, "invariants", "--symbol", "U(2)", "--emit-basis", str(target))
    assert code == 0
    obj = json.loads(target.read_text(encoding="utf-8"))
    assert len(obj["basis"]) == 2


def test_selftest_small(capsys):
    code, out, _ = run(capsys, "selftest", "--max-order", "6")
    obj = json.loads(out)
    assert code == 0 and obj["ok"] and obj["forms"] > 5


def test_byte_stable_subprocess():
    cmd = [sys.executable, "-m", "weilint", "invariants", "--symbol", "UG(2,2)"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    assert json.loads(a)["dim_kernel"] == 5
