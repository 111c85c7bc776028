import json
import hashlib

import pytest

from cvherald.cli import main

FAST = ["--x3-nodes", "41", "--cutoff", "5"]


def read_rows(path):
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "X,fidelity,success_probability"
    return [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]


def test_prep_pipeline_narrow_window(tmp_path, capsys):
    out = tmp_path / "prep.csv"
    code = main(
        ["prep-single-photon", "--resource", "fock:2", "--window", "0.001",
         "--out", str(out)] + FAST
    )
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 1
    assert rows[0][1] > 0.999
    printed = capsys.readouterr().out
    assert "F=" in printed and "P_S=" in printed


def test_prep_rejects_zero_window(tmp_path):
    code = main(
        ["prep-single-photon", "--window", "0", "--out", str(tmp_path / "x.csv")]
    )
    assert code == 2


def test_prep_rejects_missing_window(tmp_path):
    code = main(["prep-single-photon", "--out", str(tmp_path / "x.csv")])
    assert code == 2


def test_prep_coeffs_resource(tmp_path):
    out = tmp_path / "coeffs.csv"
    code = main(
        ["prep-single-photon", "--resource", "coeffs:0.7071,0.7071",
         "--window", "0.01", "--out", str(out)] + FAST
    )
    assert code == 0
    rows = read_rows(out)
    assert rows[0][1] > 0.99


def test_prep_numerical_failure_exit_code(tmp_path):
    out = tmp_path / "narrow.csv"
    code = main(
        ["prep-single-photon", "--window", "0.05", "--x3-limit", "1.2",
         "--out", str(out)] + FAST
    )
    assert code == 3


def test_nsg_ideal_near_unity(tmp_path):
    out = tmp_path / "nsg.csv"
    code = main(["nsg", "--ancilla", "ideal", "--window", "1e-3", "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    assert rows[0][1] > 0.999


def test_nsg_sweep_rows_and_trend(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(
        ["nsg", "--ancilla", "ideal", "--sweep", "0.05:0.5:5", "--out", str(out)]
    )
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 5
    xs = [r[0] for r in rows]
    assert xs == sorted(xs)
    fids = [r[1] for r in rows]
    assert all(a > b for a, b in zip(fids, fids[1:]))


def test_window_and_sweep_are_exclusive(tmp_path):
    code = main(
        ["nsg", "--window", "0.1", "--sweep", "0.1:0.2:2",
         "--out", str(tmp_path / "x.csv")]
    )
    assert code == 2


def test_manifest_contents(tmp_path):
    out = tmp_path / "prep.csv"
    assert main(
        ["prep-single-photon", "--window", "0.05", "--out", str(out)] + FAST
    ) == 0
    manifest = json.loads((tmp_path / "prep.csv.manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert manifest["command"] == "prep-single-photon"
    entry = manifest["outputs"][0]
    digest = hashlib.sha256(out.read_bytes()).hexdigest()
    assert entry["sha256"] == digest


def test_csv_reproducible(tmp_path):
    args = ["prep-single-photon", "--window", "0.05"] + FAST
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_optimize_deterministic(tmp_path):
    out1, out2 = tmp_path / "o1.json", tmp_path / "o2.json"
    assert main(["optimize", "--starts", "1", "--seed", "7", "--out", str(out1)]) == 0
    assert main(["optimize", "--starts", "1", "--seed", "7", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    payload = json.loads(out1.read_text())
    assert abs(payload["t_a"] - 0.62) < 0.02
    assert payload["trace"]


def test_plot_flag_writes_figure(tmp_path):
    out = tmp_path / "fig.csv"
    code = main(
        ["nsg", "--ancilla", "ideal", "--sweep", "0.1:0.3:3",
         "--out", str(out), "--plot"]
    )
    assert code == 0
    png = tmp_path / "fig.csv.png"
    assert png.exists() and png.stat().st_size > 0
    manifest = json.loads((tmp_path / "fig.csv.manifest.json").read_text())
    paths = [o["path"] for o in manifest["outputs"]]
    assert str(png) in paths


def test_worker_env_var_preserves_order(tmp_path, monkeypatch):
    monkeypatch.setenv("CVHERALD_WORKERS", "2")
    out = tmp_path / "par.csv"
    code = main(
        ["nsg", "--ancilla", "ideal", "--sweep", "0.1:0.4:4", "--out", str(out)]
    )
    assert code == 0
    xs = [r[0] for r in read_rows(out)]
    assert xs == sorted(xs)


def test_bad_worker_env_var(monkeypatch, tmp_path):
    monkeypatch.setenv("CVHERALD_WORKERS", "zero")
    with pytest.raises(ValueError):
        from cvherald.sweep import worker_count

        worker_count()
