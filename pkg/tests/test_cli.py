import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ringpair import _kernels
from ringpair.cli import EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from ringpair.sweep import load_config, read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
POINT = str(CONFIGS / "point.cfg")


def _write(tmp_path, text, name="c.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_rates(capsys):
    assert main(["rates", "--config", POINT]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == f"# config-hash: {load_config(POINT).config_hash}"
    values = dict(line.split(" = ") for line in out[1:])
    assert float(values["omega"]) == 0.05
    assert 0 < float(values["intracavity.herald"]) <= 1
    assert float(values["output_bus.pair_rate"]) > 0
    total = sum(float(values[f"output_bus.{k}"]) for k in ("p0", "p1a", "p1b", "p2"))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_rates_omega_override(capsys):
    assert main(["rates", "--config", POINT, "--omega", "0.3"]) == EXIT_OK
    assert "omega = 0.29999999999999999" in capsys.readouterr().out


def test_validation_error_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "system.symmetric = true\nsignal.rho = 1.2\nsignal.alpha = 0.9\n")
    assert main(["rates", "--config", path]) == EXIT_VALIDATION
    assert "line 2: signal.rho: must lie in [0, 1]" in capsys.readouterr().err


def test_duplicate_and_unknown_keys(tmp_path, capsys):
    path = _write(tmp_path, "signal.rho = 0.9\nsignal.rho = 0.8\nsignal.bogus = 1\n")
    assert main(["info", "--config", path]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "warning: line 2: duplicate key 'signal.rho'" in err
    assert "line 3: unknown key 'signal.bogus'" in err


def test_missing_file(capsys):
    assert main(["info", "--config", "/nonexistent/x.cfg"]) == EXIT_VALIDATION
    assert "error:" in capsys.readouterr().err


def test_pole_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "system.symmetric = true\nsignal.rho = 1.0\nsignal.alpha = 1.0\n")
    assert main(["rates", "--config", path]) == EXIT_NUMERICAL
    assert "numerical error" in capsys.readouterr().err


def test_sweep_csv_and_json(tmp_path, capsys):
    cfg = str(CONFIGS / "car_vs_rho.cfg")
    csv_path, json_path = tmp_path / "o.csv", tmp_path / "o.json"
    assert main(["sweep", "--config", cfg, "--out", str(csv_path)]) == EXIT_OK
    assert main(["sweep", "--config", cfg, "--out", str(json_path)]) == EXIT_OK
    assert "[json]" in capsys.readouterr().err
    ds = read_csv(csv_path.read_bytes())
    doc = json.loads(json_path.read_bytes())
    assert doc["columns"] == ds.columns and len(doc["rows"]) == len(ds.flags)
    np.testing.assert_array_equal(np.array(doc["rows"], dtype=float), ds.data)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x.dat"), "--format", "json"]) == EXIT_OK
    assert (tmp_path / "x.dat").read_bytes() == json_path.read_bytes()


def test_sweep_to_stdout(capsysbinary):
    assert main(["sweep", "--config", str(CONFIGS / "car_vs_rho.cfg"), "--out", "-"]) == EXIT_OK
    out = capsysbinary.readouterr().out
    assert out.startswith(b"# config-hash: ")


def test_sweep_without_sweep_section(capsys):
    assert main(["sweep", "--config", POINT, "--out", "-"]) == EXIT_VALIDATION


def test_limits(tmp_path, capsys):
    out = tmp_path / "lim.csv"
    assert main(["limits", "--config", str(CONFIGS / "limits.cfg"), "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "G_diag" in text and "order" in text
    ds = read_csv(out.read_bytes())
    assert ds.flags[-1] == "fitted_order" and len(ds.flags) == 5


def test_info(capsys):
    assert main(["info", "--config", POINT]) == EXIT_OK
    out = capsys.readouterr().out
    assert f"backend: {_kernels.backend()}" in out
    assert "config.signal.rho = 0.95" in out
    assert "derived.idler.T = 1.2" in out and "derived.C_aa = " in out


def test_info_with_sweep(capsys):
    assert main(["info", "--config", str(CONFIGS / "pair_rate_vs_rho.cfg")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "sweep.rows = " in out and "derived: unavailable" in out


def test_verify_fast(capsys):
    assert main(["verify"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.rstrip().endswith("invariants passed")
    assert "FAIL" not in out


def test_verify_reports_broken_kernel(monkeypatch, capsys):
    real = _kernels.transfer

    def broken(*args):
        out = real(*args).copy()
        out[..., 1] *= -1  # wrong sign on G_ab
        return out

    monkeypatch.setattr(_kernels, "transfer", broken)
    assert main(["verify"]) == EXIT_INVARIANT
    out = capsys.readouterr().out
    assert "FAIL  transfer: G = H P_xi X_tau - T_rho (relative)" in out


def test_usage_errors():
    for argv in (["sweep", "--config", POINT], ["sweep", "--config", POINT, "--out", "x", "--format", "xml"],
                 ["frobnicate"], []):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == EXIT_VALIDATION


def test_console_entry_point(tmp_path):
    exe = shutil.which("ringpair")
    cmd = [exe] if exe else [sys.executable, "-m", "ringpair"]
    proc = subprocess.run(cmd + ["rates", "--config", POINT], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("# config-hash: ")
    bad = _write(tmp_path, "signal.rho = 2\n")
    proc = subprocess.run(cmd + ["info", "--config", bad], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 1 and "line 1" in proc.stderr
