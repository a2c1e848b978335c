import json

import pytest

from ssrlrcm.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_synthetic_table(capsys):
    code, out, _ = run(capsys, "synthetic", "--n", "150", "--reps", "2")
    assert code == EXIT_OK
    assert out.splitlines()[0].split()[:3] == ["n", "sigma_eps", "RMSE_LRCM"]


def test_csv_to_file(tmp_path, capsys):
    target = tmp_path / "r.csv"
    code, out, _ = run(capsys, "synthetic", "--n", "150", "--reps", "3", "--format", "csv", "--out", str(target))
    assert code == EXIT_OK and out == ""
    assert len(target.read_text().strip().splitlines()) == 4


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 120, "repetitions": 2, "sigma_eps": 0.1, "solver": {"alpha": 0.5}, "ensemble": {"r": 4}}))
    code, out, _ = run(capsys, "synthetic", "--config", str(cfg), "--reps", "1", "--beta", "0.01", "--format", "json")
    assert code == EXIT_OK
    rep = json.loads(out)
    c = rep["config"]
    assert c["n"] == 120 and c["repetitions"] == 1 and c["sigma_eps"] == 0.1
    assert c["solver"]["alpha"] == 0.5 and c["solver"]["beta"] == 0.01
    assert c["ensemble"]["r"] == 4 and c["ensemble"]["k_range"] == [2]
    assert len(rep["repetitions"]) == 1


def test_k_and_ell_flags(capsys):
    code, out, _ = run(capsys, "synthetic", "--n", "100", "--reps", "1", "--k", "2,3", "--ell", "2.0", "--ensemble-size", "3", "--format", "json")
    c = json.loads(out)["config"]
    assert code == EXIT_OK and c["ensemble"]["k_range"] == [2, 3] and c["baseline"]["lengthscale"] == 2.0


def test_dense_cap_flag(capsys):
    code, out, _ = run(capsys, "synthetic", "--n", "150", "--reps", "1", "--dense-cap", "10")
    assert code == EXIT_OK and "DenseInfeasible" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["synthetic", "--n", "abc"],
        ["synthetic", "--format", "xml"],
        ["synthetic", "--reps", "0"],
        ["synthetic", "--beta", "0"],
        ["forestfires"],
        ["synthetic", "--config", "/nonexistent/file.json"],
    ],
)
def test_usage_errors(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_USAGE


def test_runtime_error_on_missing_data(capsys, tmp_path):
    code, _, err = run(capsys, "forestfires", "--data", str(tmp_path / "missing.csv"), "--reps", "1")
    assert code == EXIT_RUNTIME and "missing.csv" in err


def test_runtime_error_on_bad_data(capsys, tmp_path):
    p = tmp_path / "ff.csv"
    p.write_text("X,Y,area\n1,2,3\n")
    code, _, err = run(capsys, "forestfires", "--data", str(p))
    assert code == EXIT_RUNTIME and "MissingColumn" in err


def test_forestfires_on_fixture(capsys, tmp_path):
    import numpy as np

    rng = np.random.default_rng(0)
    header = "X,Y,month,day,FFMC,DMC,DC,ISI,temp,RH,wind,rain,area"
    rows = [",".join([*(f"{v:.3f}" for v in rng.random(2) * 9), "aug", "fri", *(f"{v:.3f}" for v in rng.random(8) * 100), f"{rng.exponential(5):.2f}"]) for _ in range(120)]
    p = tmp_path / "ff.csv"
    p.write_text("\n".join([header, *rows]) + "\n")
    code, out, _ = run(capsys, "forestfires", "--data", str(p), "--reps", "2", "--format", "json")
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["config"]["ensemble"]["k_range"] == [10] and rep["config"]["baseline"]["lengthscale"] == 0.1
    assert all(r["n"] == 120 for r in rep["repetitions"])


def test_gridsearch(capsys):
    code, out, err = run(capsys, "gridsearch", "--n", "300", "--alphas", "0.5,1", "--betas", "0.001", "--format", "json")
    assert code == EXIT_OK, err
    doc = json.loads(out)
    assert doc["best"]["beta"] == 0.001 and len(doc["scores"]) == 2


def test_hmatrix_bench(capsys, tmp_path):
    dump = tmp_path / "blocks.json"
    code, out, _ = run(capsys, "hmatrix-bench", "--n", "400", "--n-min", "16", "--ranks", "2,5", "--format", "json", "--dump-structure", str(dump))
    assert code == EXIT_OK
    doc = json.loads(out)
    errs = [r["err_2norm"] for r in doc["rows"]]
    assert doc["n"] == 400 and len(errs) == 3 and errs[0] > errs[1]
    assert json.loads(dump.read_text())["blocks"]
