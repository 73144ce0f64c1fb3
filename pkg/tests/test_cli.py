import json

import pytest

from augconjoint import __version__
from augconjoint.cli import main


def _simulate(tmp_path, *world, m=300, n=900, seed=1):
    out = tmp_path / f"data{seed}"
    assert main(["--seed", str(seed), "--out", str(out), "simulate", *world, "-m", str(m), "-n", str(n)]) == 0
    return out / "primary.csv", out / "auxiliary.csv"


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_simulate_fit_infer(tmp_path):
    pri, aux = _simulate(tmp_path, "--world", "alignment", "--dim", "2", "--eta", "1.0")
    out = tmp_path / "fit.json"
    assert main(["--out", str(out), "fit", "--estimator", "aae", "--primary", str(pri), "--auxiliary", str(aux),
                 "--beta-star", "0.5,-0.5"]) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "fit" and len(doc["payload"]["beta_hat"]) == 2
    assert doc["payload"]["metrics"]["mape"] >= 0
    out = tmp_path / "infer.json"
    assert main(["--out", str(out), "infer", "--primary", str(pri), "--auxiliary", str(aux)]) == 0
    payload = json.loads(out.read_text())["payload"]
    assert payload["ci_aae"]["rows"] == 2 and payload["ci_aae"]["cols"] == 2


def test_baseline_fits_and_csv(tmp_path, capsys):
    pri, aux = _simulate(tmp_path, "--world", "single-product")
    capsys.readouterr()
    for est, files in (("primary", ["--primary", str(pri)]), ("auxiliary", ["--auxiliary", str(aux)]),
                       ("naive", ["--primary", str(pri), "--auxiliary", str(aux)])):
        assert main(["--format", "csv", "fit", "--estimator", est, *files]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "coefficient,beta_hat" and len(lines) == 2


def test_exit_code_validation(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("task_id,alt,x_1,y,z\n1,1,oops,1,1\n")
    assert main(["fit", "--estimator", "primary", "--primary", str(bad)]) == 2
    pri, aux = _simulate(tmp_path, "--world", "single-product")
    # auxiliary estimator without auxiliary data
    assert main(["fit", "--estimator", "auxiliary", "--primary", str(pri)]) == 2
    # a primary file read as auxiliary carries y
    assert main(["fit", "--estimator", "auxiliary", "--auxiliary", str(pri)]) == 2


def test_exit_code_numerical(tmp_path):
    path = tmp_path / "sep.csv"
    path.write_text("task_id,alt,x_1,y,z\n1,1,1.0,1,1\n2,1,-1.0,0,0\n3,1,2.0,1,1\n4,1,-2.0,0,0\n")
    assert main(["fit", "--estimator", "primary", "--primary", str(path)]) == 3


def test_exit_code_io(tmp_path):
    assert main(["fit", "--estimator", "primary", "--primary", str(tmp_path / "missing.csv")]) == 4
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["--out", str(blocker / "x.json"), "sweep-eta", "--instances", "1", "--eta-grid", "1",
                 "--draws", "200", "--dim", "2"]) == 4


def test_sweep_csv_output(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["--format", "csv", "--out", str(out), "sweep-eta", "--instances", "2", "--eta-grid", "0.5,2",
                 "--draws", "500", "--dim", "2"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "eta,instance,min_eig,abs_prob_diff" and len(lines) == 5


def test_same_seed_same_bytes(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    args = ["benchmark", "--world", "alignment", "--dim", "2", "-m", "50", "-n", "200", "--replications", "3",
            "--g", "parametric", "--oracle-draws", "2000"]
    assert main(["--seed", "5", "--out", str(a), *args]) == 0
    assert main(["--seed", "5", "--out", str(b), *args]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    assert main(["--seed", "6", "--out", str(c), *args]) == 0
    assert a.read_bytes() != c.read_bytes()
