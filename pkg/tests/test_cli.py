import csv
import json

import pytest

from invgrid.cli import main


def test_analyze_writes_eigenvalues_and_equilibrium(tmp_path, capsys):
    code = main(["analyze", "--case", "2", "--load-scale", "0.4", "--line-model", "dynpi",
                 "--gain", "k_q=0.1", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "equilibrium_case2_0.4_dynpi.json").read_text())
    assert doc["states"] == 66 and doc["gains"]["k_q"] == 0.1
    assert doc["residual_norm"] < 1e-9
    with open(tmp_path / "eigs_case2_0.4_dynpi.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 66
    assert "max_real" in capsys.readouterr().out


def test_sweep_is_invariant_to_worker_count(tmp_path):
    outs = []
    for workers in (1, 2):
        out = tmp_path / f"w{workers}"
        assert main(["sweep", "--samples", "2", "--seed", "3", "--workers", str(workers), "--case", "2",
                     "--load-scale", "0.4", "--segments", "2", "--out", str(out)]) == 0
        outs.append((out / "results.csv").read_bytes())
    assert outs[0] == outs[1]
    summary = json.loads((tmp_path / "w1" / "summary.json").read_text())
    assert summary["grid"]["admissible"] == 7000
    assert summary["plan"]["seed"] == 3


def test_freqresp_and_plot(tmp_path):
    assert main(["freqresp", "--points", "5", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "freqresp.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 15 and {r["line_model"] for r in rows} == {"statpi", "dynpi", "mssb"}
    r = rows[0]
    assert float(r["z_abs"]) == pytest.approx(abs(complex(float(r["z_re"]), float(r["z_im"]))))
    assert main(["analyze", "--out", str(tmp_path)]) == 0
    assert main(["plot", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "eigs.svg").read_text().lstrip().startswith("<?xml")


@pytest.mark.parametrize("argv", [
    ["analyze", "--gain", "k_zz=1"],
    ["analyze", "--gain", "k_q=-1"],
    ["analyze", "--segments", "0"],
    ["freqresp", "--branch", "nope"],
])
def test_configuration_errors_exit_with_two(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sampels": 3}))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text(json.dumps({"current_voltage_ratio": 10.0}))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_io_errors_exit_with_three(tmp_path):
    assert main(["analyze", "--config", str(tmp_path / "missing.json")]) == 3
    assert main(["plot", "--out", str(tmp_path / "empty")]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["analyze", "--out", str(blocker / "sub")]) == 3
