"""Biphoton state, reduced-density-matrix populations and pair-source rates.

To first order in the pump the output (or intracavity) state is

    |Psi> = [1 - i |r_ab| (2 pi delta + C_vac)] |0> - i |r_ab| psi2 |1,1> + (noise terms)

where ``psi2``, ``C_vac``, the single-photon amplitudes ``phi_a1``, ``phi_b1``
and the both-lost weight ``r0`` are bilinear in the entries of (G, H).  The
same formulas apply inside the ring with (G, H) replaced by (G^(L), H^(L)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .commutators import commutators_closed_form
from .errors import ValidationError
from .transfer import Location, output_transfer, intracavity_transfer

# CAR denominators at or below this fraction of |psi2|^2 are treated as zero.
CAR_ZERO_TOLERANCE = 1e-14


@dataclass(frozen=True)
class BiphotonState:
    psi2: np.ndarray
    c_vac: np.ndarray
    phi_a1: np.ndarray
    phi_b1: np.ndarray
    r0: np.ndarray
    location: Location = Location.OUTPUT_BUS


@dataclass(frozen=True)
class RateRecord:
    """Per-detuning observables; every field broadcasts with ``omega``.

    ``pair_rate`` and the singles rates carry the factor ``|r_ab|^2``;
    ``psi2_abs2`` is the normalised rate ``R~ = |psi2|^2``.
    """

    omega: np.ndarray
    psi2_abs2: np.ndarray
    pair_rate: np.ndarray
    singles_a: np.ndarray
    singles_b: np.ndarray
    car: np.ndarray
    herald: np.ndarray
    p0: np.ndarray
    p1a: np.ndarray
    p1b: np.ndarray
    p2: np.ndarray
    location: Location = Location.OUTPUT_BUS

    FIELDS = ("psi2_abs2", "pair_rate", "singles_a", "singles_b", "car", "herald", "p0", "p1a", "p1b", "p2")


def _abs2(z):
    z = np.asarray(z)
    return z.real * z.real + z.imag * z.imag


def biphoton_state(pair, comms, theta_p) -> BiphotonState:
    """Amplitudes of the first-order state for a transfer pair (bus or intracavity)."""
    amps, r0 = _kernels.biphoton(pair.G, pair.H, comms.C_aa, comms.C_bb, theta_p)
    return BiphotonState(amps[..., 0], amps[..., 1], amps[..., 2], amps[..., 3], r0, pair.location)


def _pair_rate(r_ab2, state):
    return r_ab2 * _abs2(state.psi2)


def _singles(r_ab2, state, comms):
    return r_ab2 * _abs2(state.phi_a1) * comms.C_bb, r_ab2 * comms.C_aa * _abs2(state.phi_b1)


def _populations(r_ab2, state, comms):
    w2 = _pair_rate(r_ab2, state)
    w1a, w1b = _singles(r_ab2, state, comms)
    w0 = 1.0 + r_ab2 * (_abs2(state.c_vac) + state.r0)
    total = w0 + w1a + w1b + w2
    return w0 / total, w1a / total, w1b / total, w2 / total


def pair_rate(config, omega, state):
    """``R_ab = |r_ab|^2 |psi2|^2``."""
    return _pair_rate(config.r_ab ** 2, state) + 0.0 * np.asarray(omega, dtype=float)


def singles_rates(config, omega, state, comms):
    """Loss-induced singles: idler lost (``singles_a``) and signal lost (``singles_b``)."""
    zero = 0.0 * np.asarray(omega, dtype=float)
    sa, sb = _singles(config.r_ab ** 2, state, comms)
    return sa + zero, sb + zero


def car(state, comms):
    """Coincidence-to-accidental ratio; ``+inf`` where the accidental weight vanishes."""
    num = _abs2(state.psi2)
    den = _abs2(state.phi_a1) * comms.C_bb + comms.C_aa * _abs2(state.phi_b1)
    zero = np.abs(den) <= CAR_ZERO_TOLERANCE * num
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(zero, np.inf, num / np.where(zero, 1.0, den))
    return out


def herald(state, comms):
    """Heralding efficiency of the idler by detection of the signal."""
    num = _abs2(state.psi2)
    den = _abs2(state.phi_a1) * comms.C_bb + num
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def populations(config, omega, state, comms):
    """Normalised zero/one/two-photon populations ``(p0, p1a, p1b, p2)``.

    The vacuum weight uses the state norm truncated at ``O(|r_ab|^2)``.
    """
    zero = 0.0 * np.asarray(omega, dtype=float)
    return tuple(p + zero for p in _populations(config.r_ab ** 2, state, comms))


def observables_from(pair, comms, theta_p, r_ab2, omega):
    """All :class:`RateRecord` fields from a transfer pair and commutators.

    ``theta_p`` and ``r_ab2`` (``|r_ab|^2``) may be arrays matching the
    leading shape of ``pair``; this is the single evaluation path shared by
    :func:`rate_record` and the sweep engine.
    """
    state = biphoton_state(pair, comms, theta_p)
    sa, sb = _singles(r_ab2, state, comms)
    p0, p1a, p1b, p2 = _populations(r_ab2, state, comms)
    return RateRecord(omega, _abs2(state.psi2), _pair_rate(r_ab2, state), sa, sb, car(state, comms),
                      herald(state, comms), p0, p1a, p1b, p2, pair.location)


def rate_record(config, omega, location=Location.OUTPUT_BUS) -> RateRecord:
    """All observables for one configuration over ``omega`` (scalar or array)."""
    location = Location(location)
    omega = np.asarray(omega, dtype=float)
    pair = output_transfer(config, omega) if location is Location.OUTPUT_BUS else intracavity_transfer(config, omega)
    comms = commutators_closed_form(config, omega)
    return observables_from(pair, comms, config.pump.phase, config.r_ab ** 2, omega)


def psi2_mrr_closed_form(config, omega):
    """Intracavity two-photon amplitude written directly in the ring parameters."""
    a, b = config.signal, config.idler
    theta_a, theta_b = config.thetas(omega)
    ea, eb = np.exp(1j * theta_a), np.exp(1j * theta_b)
    A = abs(config.r_a) * abs(config.r_b)
    xa, xb = a.alpha * a.rho, b.alpha * b.rho
    num = (a.alpha * b.alpha * a.tau * b.tau * np.exp(1j * (theta_b + config.pump.phase))
           * (eb * A - (1.0 - ea * xa) * (eb - xb)))
    den = (ea * eb * A - (ea - xa) * (eb - xb)) * ((1.0 - ea * xa) * (1.0 - eb * xb) - A)
    return num / den


def closed_form_car(config):
    """Intracavity CAR ``alpha^2 (1 - rho^2) / (2 (1 - |r|^2 - alpha^2))`` (symmetric modes only)."""
    if not config.is_symmetric:
        raise ValidationError("the closed-form CAR is only defined for identical signal and idler modes; "
                              "use rate_record(..., location='intracavity') for asymmetric configurations")
    m = config.signal
    den = 2.0 * (1.0 - abs(config.r_a) ** 2 - m.alpha ** 2)
    num = m.alpha ** 2 * (1.0 - m.rho ** 2)
    if den == 0.0:
        return math.inf
    return num / den


def closed_form_herald(config):
    """Intracavity heralding efficiency ``alpha_b^2 (1-rho_b^2) / (1 - |r_b|^2 - alpha_b^2 rho_b^2)``."""
    b = config.idler
    return b.alpha ** 2 * (1.0 - b.rho ** 2) / (1.0 - abs(config.r_b) ** 2 - b.alpha ** 2 * b.rho ** 2)


def closed_form_rates(config, omega=0.0):
    """``(car_mrr, herald_mrr)``; both are independent of ``omega``."""
    shape = np.shape(omega)
    return np.full(shape, closed_form_car(config)), np.full(shape, closed_form_herald(config))
