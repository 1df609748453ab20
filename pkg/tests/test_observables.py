import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ringpair.commutators import commutators_closed_form
from ringpair.core import Process, PumpConfig, SystemConfig
from ringpair.errors import ValidationError
from ringpair.observables import (RateRecord, biphoton_state, car, closed_form_car, closed_form_herald,
                                  closed_form_rates, herald, pair_rate, populations, psi2_mrr_closed_form,
                                  rate_record, singles_rates)
from ringpair.transfer import Location, intracavity_transfer, output_transfer

from .test_transfer import systems, thetas

locations = st.sampled_from(list(Location))


def test_herald_spot_value():
    cfg = SystemConfig.symmetric(0.9, 0.95, 1e-5)
    expected = 0.95 ** 2 * (1 - 0.81) / (1 - 1e-10 - 0.95 ** 2 * 0.81)
    assert closed_form_herald(cfg) == pytest.approx(expected, rel=1e-15)
    assert closed_form_herald(cfg) == pytest.approx(0.63751, abs=5e-6)
    assert float(rate_record(cfg, 0.0, Location.INTRACAVITY).herald) == pytest.approx(expected, rel=1e-9)


def test_car_arithmetic():
    cfg = SystemConfig.symmetric(0.9, 0.97, 1e-5)
    expected = 0.9409 * 0.19 / (2 * (1 - 1e-10 - 0.9409))
    assert closed_form_car(cfg) == pytest.approx(expected, rel=1e-12)
    rec = rate_record(cfg, np.linspace(-1, 1, 9), Location.INTRACAVITY)
    np.testing.assert_allclose(rec.car, expected, rtol=1e-9)


def test_symmetric_car_closed_form_at_reference_point():
    cfg = SystemConfig.symmetric(0.95, 0.99, 1e-5)
    car_mrr, herald_mrr = closed_form_rates(cfg, np.zeros(4))
    rec = rate_record(cfg, 0.0, Location.INTRACAVITY)
    assert float(rec.car) == pytest.approx(car_mrr[0], rel=1e-9)
    assert float(rec.herald) == pytest.approx(herald_mrr[0], rel=1e-9)


def test_closed_form_car_requires_symmetry():
    with pytest.raises(ValidationError):
        closed_form_car(SystemConfig.build(0.9, 0.8, 0.99, 0.99, 1e-5))


def test_on_resonance_pair_rate_peak():
    # weak pump: |psi2_mrr|^2 -> (tau alpha / (1 - rho alpha))^4 on resonance
    rho, alpha = 0.95, 0.99
    cfg = SystemConfig.symmetric(rho, alpha, 1e-5)
    rec = rate_record(cfg, 0.0, Location.INTRACAVITY)
    lowest_order = (math.sqrt(1 - rho ** 2) * alpha / (1 - rho * alpha)) ** 4
    assert math.isfinite(float(rec.psi2_abs2))
    assert float(rec.psi2_abs2) == pytest.approx(lowest_order, rel=1e-6)
    assert float(rec.pair_rate) == pytest.approx(1e-10 * float(rec.psi2_abs2), rel=1e-14)


def test_positive_rates_at_reference_point():
    cfg = SystemConfig.symmetric(0.9, 0.95, 1e-5)
    for loc in Location:
        rec = rate_record(cfg, 0.0, loc)
        for name in ("pair_rate", "singles_a", "singles_b", "car", "herald"):
            assert float(getattr(rec, name)) > 0, (loc, name)


@settings(max_examples=100, deadline=None)
@given(systems())
def test_psi2_dual_path(cfg):
    om = np.linspace(0, 2 * np.pi, 31) / cfg.signal.T
    psi = biphoton_state(intracavity_transfer(cfg, om), commutators_closed_form(cfg, om), cfg.pump.phase).psi2
    ref = psi2_mrr_closed_form(cfg, om)
    assert np.max(np.abs(psi - ref) / np.maximum(np.abs(ref), 1e-300)) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(systems(), thetas, locations, st.floats(0, 2 * np.pi))
def test_pump_phase_invariance(cfg, omega, loc, shift):
    shifted = SystemConfig(cfg.signal, cfg.idler, PumpConfig(cfg.pump.process, cfg.pump.g, cfg.pump.alpha_p_mag,
                                                             cfg.pump.theta_p + shift))
    a, b = rate_record(cfg, omega, loc), rate_record(shifted, omega, loc)
    for name in ("psi2_abs2", "car", "herald", "p2"):
        x, y = float(getattr(a, name)), float(getattr(b, name))
        if math.isinf(x):
            assert math.isinf(y)
        elif math.isnan(x):  # nothing reaches the bus (critical coupling): 0/0
            assert math.isnan(y)
        else:
            assert x == pytest.approx(y, rel=1e-12, abs=1e-300)


@settings(max_examples=150, deadline=None)
@given(systems(), thetas, locations)
def test_rate_invariants(cfg, omega, loc):
    # negative commutators (|r|^2 > 1 - alpha^2) are outside the weak-pump model
    assume(1 - cfg.signal.alpha ** 2 - abs(cfg.r_a) ** 2 >= 0 and 1 - cfg.idler.alpha ** 2 - abs(cfg.r_b) ** 2 >= 0)
    rec = rate_record(cfg, omega, loc)
    assert 0.0 <= float(rec.herald) <= 1.0
    total = rec.p0 + rec.p1a + rec.p1b + rec.p2
    assert abs(total - 1.0) <= 1e-12
    p1 = float(rec.p1a + rec.p1b)
    if math.isfinite(float(rec.car)) and p1 > 0:
        assert float(rec.p2) / p1 == pytest.approx(float(rec.car), rel=1e-12)
    assert float(rec.psi2_abs2) >= 0 and float(rec.singles_a) >= 0 and float(rec.singles_b) >= 0


def test_p2_over_p1_is_car_at_reference_point():
    cfg = SystemConfig.symmetric(0.9, 0.95, 1e-5)
    for loc in Location:
        rec = rate_record(cfg, 0.3, loc)
        assert float(rec.p2 / (rec.p1a + rec.p1b)) == pytest.approx(float(rec.car), rel=1e-12)


@given(st.floats(0.0, 0.99), st.floats(0.75, 0.998))
def test_pair_rate_increases_with_alpha_on_resonance(rho, alpha):
    lo = rate_record(SystemConfig.symmetric(rho, alpha, 1e-5), 0.0, Location.INTRACAVITY).psi2_abs2
    hi = rate_record(SystemConfig.symmetric(rho, alpha + 1e-3, 1e-5), 0.0, Location.INTRACAVITY).psi2_abs2
    assert hi > lo


@pytest.mark.parametrize("loc", list(Location))
def test_lossless_limit(loc):
    cfg = SystemConfig.build(0.8, 0.6, 1.0, 1.0, 0.0)
    rec = rate_record(cfg, np.linspace(-2, 2, 11), loc)
    assert np.all(np.isposinf(rec.car))
    np.testing.assert_allclose(rec.herald, 1.0, atol=1e-12)
    assert closed_form_car(SystemConfig.build(0.8, 0.8, 1.0, 1.0, 0.0)) == math.inf


def test_sfwm_phase_and_rates():
    spdc = SystemConfig.build(0.9, 0.9, 0.97, 0.97, 1e-5, theta_p=0.3)
    sfwm = SystemConfig.build(0.9, 0.9, 0.97, 0.97, 1e-5, theta_p=0.15, process=Process.SFWM)
    a, b = rate_record(spdc, 0.2), rate_record(sfwm, 0.2)
    for name in RateRecord.FIELDS:
        assert float(getattr(a, name)) == pytest.approx(float(getattr(b, name)), rel=1e-12)


def test_public_helpers_agree_with_rate_record():
    cfg = SystemConfig.build(0.9, 0.85, 0.97, 0.96, 1e-4, T_b=1.2, theta_p=1.0)
    om = np.linspace(-1, 1, 5)
    pair = output_transfer(cfg, om)
    comms = commutators_closed_form(cfg, om)
    state = biphoton_state(pair, comms, cfg.pump.phase)
    rec = rate_record(cfg, om)
    np.testing.assert_array_equal(pair_rate(cfg, om, state), rec.pair_rate)
    sa, sb = singles_rates(cfg, om, state, comms)
    np.testing.assert_array_equal(sa, rec.singles_a)
    np.testing.assert_array_equal(sb, rec.singles_b)
    np.testing.assert_array_equal(car(state, comms), rec.car)
    np.testing.assert_array_equal(herald(state, comms), rec.herald)
    for x, y in zip(populations(cfg, om, state, comms), (rec.p0, rec.p1a, rec.p1b, rec.p2)):
        np.testing.assert_array_equal(x, y)
