import json
import math
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringpair.core import SystemConfig
from ringpair.errors import ConfigError, ConfigWarning, ValidationError
from ringpair.observables import psi2_mrr_closed_form, rate_record
from ringpair.sweep import (Dataset, emit, evaluate_point, from_json, grid_points, limits_dataset, load_config,
                            parse_config, read_csv, run_sweep)
from ringpair.transfer import Location

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """\
# two-axis asymmetric sweep
signal.T = 1.0
signal.alpha = 0.97
idler.T = 1.3
idler.rho = 0.9
idler.alpha = 0.95
pump.r = 1e-5
pump.phase = 0.4
sweep.quantity = pair_rate_out
sweep.axis1.name = rho_a
sweep.axis1.min = 0.5
sweep.axis1.max = 0.9
sweep.axis1.count = 3
sweep.axis2.name = theta
sweep.axis2.min = -1
sweep.axis2.max = 1
sweep.axis2.count = 4
"""


def _error(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value


def test_error_names_key_and_line():
    err = _error("signal.alpha = 0.9\nsignal.rho = 1.2\n")
    assert err.line == 2
    assert str(err).startswith("line 2: signal.rho:")


@pytest.mark.parametrize("text, line", [
    ("signal.rho 0.9\n", 1),
    ("\n\nfoo = 1\n", 3),
    ("signal.rho = \n", 1),
    ("signal.Rho = 0.5\n", 1),
    ("signal.rho = 0.9\nsignal.alpha = abc\n", 2),
    ("signal.rho = 0.9\nsignal.alpha = nan\n", 2),
    ("signal.rho = 0.9\nsignal.gamma_T = 0.1\n", 2),
])
def test_parse_errors_carry_line_numbers(text, line):
    assert _error(text).line == line


def test_keys_are_case_sensitive():
    assert "unknown key 'Signal.rho'" in str(_error("Signal.rho = 0.9\n"))


def test_duplicate_key_last_wins():
    text = "system.symmetric = true\nsignal.rho = 0.5\nsignal.alpha = 0.9\nsignal.rho = 0.8\n"
    with pytest.warns(ConfigWarning, match="line 4: duplicate key 'signal.rho'"):
        bundle = parse_config(text)
    assert bundle.params["rho_a"] == 0.8 and bundle.lines["signal.rho"] == 4


def test_comments_and_blank_lines():
    a = parse_config("system.symmetric = true\nsignal.rho = 0.9\nsignal.alpha = 0.95\n")
    b = parse_config("# header\n\nsignal.alpha = 0.95   # loss\n  signal.rho=0.9\nsystem.symmetric = true\n")
    assert a.config_hash == b.config_hash
    assert a.canonical() == b.canonical()
    assert a.system() == b.system()
    c = parse_config("system.symmetric = true\nsignal.rho = 0.90\nsignal.alpha = 0.95\n")
    assert c.config_hash != a.config_hash


def test_rate_and_gain_forms():
    b = parse_config("system.symmetric = true\nsignal.gamma_T = 0.1\nsignal.gamma_int_T = 0.02\npump.g = 2e-5\n"
                     "pump.amplitude = 0.5\ndetuning.omega = 0.2\nsignal.T = 2.0\n")
    cfg = b.system()
    assert cfg.signal.rho == pytest.approx(math.exp(-0.05))
    assert cfg.idler.alpha == pytest.approx(math.exp(-0.01))
    assert abs(cfg.r_a) == pytest.approx(2e-5 * 0.5 * 2.0)
    assert b.params["theta"] == pytest.approx(0.4) and b.omega == pytest.approx(0.2)


@pytest.mark.parametrize("extra, fragment", [
    ("sweep.axis1.count = 1\n", "must be >= 2"),
    ("sweep.axis1.min = 0.9\n", "min must be < max"),
    ("signal.rho = 0.5\n", "is fixed but rho is also swept"),
    ("detuning.theta = 0.1\n", "is fixed but theta is also swept"),
    ("sweep.axis2.name = rho\nsweep.axis2.min = 0.1\n", "overlap"),
    ("sweep.axis1.values = 0.1, 0.2\nsweep.axis1.spacing = linear\n", "only used with list spacing"),
    ("sweep.axis1.spacing = cubic\n", "must be one of"),
    ("sweep.location = intracavity\n", "conflicts with quantity"),
    ("sweep.axis1.max = 1.5\n", "values must lie in [0, 1]"),
    ("pump.g = 1e-5\n", "pump.r cannot be combined"),
])
def test_sweep_validation(extra, fragment):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConfigWarning)
        err = _error(BASE + extra)
    assert fragment in str(err)


def test_sweep_requires_an_axis():
    assert "at least one axis" in str(_error("system.symmetric = true\nsignal.rho = 0.9\nsignal.alpha = 0.9\n"
                                             "sweep.quantity = car_mrr\n"))


def test_symmetric_conflicts():
    assert "copied from signal" in str(_error("system.symmetric = true\nidler.rho = 0.9\n"))
    text = ("system.symmetric = true\nsignal.alpha = 0.9\nsweep.quantity = car_mrr\nsweep.axis1.name = rho_a\n"
            "sweep.axis1.values = 0.5, 0.6\n")
    assert "conflicts with system.symmetric" in str(_error(text))


def test_missing_key_has_no_line():
    err = _error("signal.rho = 0.9\nsignal.alpha = 0.9\nidler.rho = 0.9\n")
    assert err.line is None and "idler.alpha" in str(err)


def test_row_count_and_order():
    bundle = parse_config(BASE)
    ds = run_sweep(bundle)
    assert ds.data.shape == (12, 4) == (bundle.sweep.n_rows, len(ds.columns))
    assert ds.columns == ["rho_a", "theta", "psi2_abs2", "pair_rate"]
    np.testing.assert_array_equal(ds.column("rho_a"), np.repeat([0.5, 0.7, 0.9], 4))
    np.testing.assert_array_equal(ds.column("theta"), np.tile(np.linspace(-1, 1, 4), 3))
    assert ds.quantity == "pair_rate_out" and ds.location == "output_bus"


def test_sweep_matches_independent_point_calls():
    bundle = parse_config(BASE)
    ds = run_sweep(bundle)
    for row, (coords, p) in zip(ds.data, grid_points(bundle)):
        cfg = SystemConfig.build(p["rho_a"], 0.9, 0.97, 0.95, 1e-5, T_a=1.0, T_b=1.3, theta_p=0.4)
        rec = rate_record(cfg, p["theta"])
        assert row[2] == float(rec.psi2_abs2) and row[3] == float(rec.pair_rate)
        vals, flag = evaluate_point(bundle.system(**p), p["theta"], "pair_rate_out")
        assert flag == "ok" and list(vals) == list(row[2:])


def test_deterministic():
    bundle = load_config(CONFIGS / "car_vs_rho_theta.cfg")
    assert emit(run_sweep(bundle)) == emit(run_sweep(load_config(CONFIGS / "car_vs_rho_theta.cfg")))


def test_car_constant_in_theta():
    ds = run_sweep(load_config(CONFIGS / "car_vs_rho_theta.cfg"))
    car = ds.column("car").reshape(50, 21)
    spread = (car.max(axis=1) - car.min(axis=1)) / car.max(axis=1)
    assert np.max(spread) <= 1e-10


def test_pair_rate_golden_values():
    ds = run_sweep(load_config(CONFIGS / "pair_rate_vs_rho.cfg"))
    ok = np.array(ds.flags) == "ok"
    for alpha, rho, psi in zip(ds.column("alpha")[ok], ds.column("rho")[ok], ds.column("psi2_abs2")[ok]):
        cfg = SystemConfig.symmetric(rho, alpha, 1e-5)
        ref = abs(complex(psi2_mrr_closed_form(cfg, 0.0))) ** 2
        assert psi == pytest.approx(ref, rel=1e-10)


def test_undefined_and_pole_flags():
    text = ("system.symmetric = true\nsignal.alpha = 1.0\nsweep.quantity = pair_rate_mrr\nsweep.axis1.name = rho\n"
            "sweep.axis1.values = 0.5, 1.0\n")
    ds = run_sweep(parse_config(text))
    assert ds.flags == ["ok", "undefined"]
    assert np.all(np.isnan(ds.data[1, 1:]))
    text = text.replace("pair_rate_mrr", "transfer_entry")
    ds = run_sweep(parse_config(text))
    assert ds.flags == ["ok", "pole"]


def test_spacings():
    text = ("system.symmetric = true\nsignal.rho = 0.9\nsweep.quantity = herald_mrr\nsweep.axis1.name = alpha\n"
            "sweep.axis1.min = 0.01\nsweep.axis1.max = 1\nsweep.axis1.count = 3\nsweep.axis1.spacing = log\n")
    ds = run_sweep(parse_config(text))
    np.testing.assert_allclose(ds.column("alpha"), [0.01, 0.1, 1.0], rtol=1e-15)
    text = ("system.symmetric = true\nsignal.rho = 0.9\nsweep.quantity = herald_mrr\nsweep.axis1.name = alpha\n"
            "sweep.axis1.values = 0.9, 0.5, 0.7\n")
    assert list(run_sweep(parse_config(text)).column("alpha")) == [0.9, 0.5, 0.7]
    assert "log spacing needs min > 0" in str(_error(text.replace("sweep.axis1.values = 0.9, 0.5, 0.7\n",
                                                                  "sweep.axis1.min = 0\nsweep.axis1.max = 1\n"
                                                                  "sweep.axis1.count = 3\n"
                                                                  "sweep.axis1.spacing = log\n")))


def test_rate_axes_move_both_modes():
    text = ("system.symmetric = true\nsignal.gamma_int_T = 0.02\npump.r = 1e-5\nsweep.quantity = commutators\n"
            "sweep.axis1.name = gamma_T\nsweep.axis1.values = 0.1, 0.2\n")
    bundle = parse_config(text)
    ps = [p for _, p in grid_points(bundle)]
    assert ps[1]["rho_a"] == ps[1]["rho_b"] == pytest.approx(math.exp(-0.1))
    ds = run_sweep(bundle)
    np.testing.assert_allclose(ds.column("C_aa"), 1 - math.exp(-0.02) - 1e-10, rtol=1e-12)


def test_csv_format():
    ds = run_sweep(parse_config(BASE))
    payload = emit(ds, "csv")
    lines = payload.decode().split("\n")
    assert lines[0] == f"# config-hash: {ds.config_hash}"
    assert lines[1] == "rho_a,theta,psi2_abs2,pair_rate,flag"
    assert b"\r" not in payload and payload.endswith(b"\n")
    assert len(lines) == 2 + 12 + 1
    back = read_csv(payload)
    np.testing.assert_array_equal(back.data, ds.data)
    assert back.flags == ds.flags and back.config_hash == ds.config_hash
    assert lines[2].split(",")[2] == "%.17g" % ds.data[0, 2]


@settings(max_examples=200)
@given(st.floats(allow_nan=False))
def test_csv_float_round_trip(x):
    ds = Dataset(["x"], np.array([[x]]), ["ok"], {}, "0" * 64)
    assert read_csv(emit(ds)).data[0, 0] == x


def test_json_round_trip():
    text = ("system.symmetric = true\nsignal.alpha = 1.0\nsweep.quantity = populations\nsweep.axis1.name = rho\n"
            "sweep.axis1.values = 0.5, 1.0\n")
    ds = run_sweep(parse_config(text))
    payload = emit(ds, "json")
    doc = json.loads(payload)
    assert doc["config_hash"] == ds.config_hash and doc["config"]["signal.alpha"] == "1.0"
    assert doc["rows"][1][1] == "nan"
    assert from_json(payload) == ds
    with pytest.raises(ValidationError):
        emit(ds, "xml")


def test_limits_dataset():
    bundle = load_config(CONFIGS / "limits.cfg")
    ds = limits_dataset(bundle)
    assert ds.flags == ["ok"] * 4 + ["fitted_order"]
    assert ds.columns[:3] == ["T_a", "T_b", "err_G_diag"]
    np.testing.assert_allclose(ds.column("T_b")[:4], 1.3 * ds.column("T_a")[:4])
    assert 1.5 <= ds.column("err_G_diag")[-1] <= 2.2
    assert np.all(ds.column("err_pole_residual")[:4] <= 1e-3)


def test_limits_defaults_from_system():
    bundle = parse_config("system.symmetric = true\nsignal.T = 1e-3\nsignal.gamma = 1.0\nsignal.gamma_int = 0.2\n"
                          "pump.g = 1e-4\nlimits.points = 3\n")
    assert bundle.limits.gamma_a == pytest.approx(1.0) and bundle.limits.coupling == pytest.approx(1e-4)
    assert bundle.limits.T0 == 1e-3 and bundle.limits.points == 3
    assert "must be >= 3" in str(_error("limits.points = 2\n"))


def test_thread_cap_does_not_change_results(monkeypatch):
    from ringpair import _kernels
    ref = emit(run_sweep(parse_config(BASE)))
    monkeypatch.setenv("RINGPAIR_THREADS", "1")
    _kernels._apply_thread_cap()
    try:
        assert emit(run_sweep(parse_config(BASE))) == ref
    finally:
        monkeypatch.delenv("RINGPAIR_THREADS")
        _kernels._apply_thread_cap()


def test_location_quantities():
    text = BASE.replace("pair_rate_out", "populations") + "sweep.location = intracavity\n"
    ds = run_sweep(parse_config(text))
    total = ds.column("p0") + ds.column("p1a") + ds.column("p1b") + ds.column("p2")
    np.testing.assert_allclose(total, 1.0, atol=1e-12)
    assert ds.location == Location.INTRACAVITY.value
