"""Domain types and parameter derivations for a single-bus microring.

Three ring modes take part: the signal ``a``, the idler ``b`` and the
classical pump ``c``.  Every mode is described by its round-trip time ``T``,
its bus self-coupling ``rho = exp(-gamma*T/2)`` and its internal round-trip
transmission ``alpha = exp(-gamma_int*T/2)``.  All downstream formulas depend
only on the dimensionless groups ``theta = omega*T``, ``rho``, ``alpha`` and
the pump parameters ``r_a``, ``r_b``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .errors import ValidationError, WeakPumpWarning

# |r| above this is flagged: the pair state is only kept to first order in r.
WEAK_PUMP_THRESHOLD = 1e-2


class ModeLabel(str, enum.Enum):
    SIGNAL = "signal"
    IDLER = "idler"
    PUMP = "pump"


class Process(str, enum.Enum):
    SPDC = "SPDC"
    SFWM = "SFWM"


def derive_coupling(gamma, T):
    """Self-coupling ``rho = exp(-gamma*T/2)`` from a coupling-loss rate.

    Works elementwise on arrays.  ``gamma`` may be ``inf`` (``rho = 0``).
    """
    gamma = np.asarray(gamma, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(np.isnan(gamma)) or np.any(gamma < 0):
        raise ValidationError(f"coupling-loss rate must be >= 0, got {gamma}")
    if np.any(~(T > 0)):
        raise ValidationError(f"round-trip time must be > 0, got {T}")
    out = np.exp(-0.5 * gamma * T)
    return float(out) if out.ndim == 0 else out


def cross_coupling(rho):
    """Cross-coupling ``tau = sqrt(1 - rho**2)`` of a lossless coupler."""
    rho = np.asarray(rho, dtype=float)
    if np.any(~((rho >= 0) & (rho <= 1))):
        raise ValidationError(f"self-coupling rho must lie in [0, 1], got {rho}")
    out = np.sqrt(1.0 - rho * rho)
    return float(out) if out.ndim == 0 else out


def nonlinear_gain(process, omega_c, chi, n_bar, V_ring):
    """Nonlinear coupling constant ``g`` of the interaction Hamiltonian.

    Parameters
    ----------
    process : Process or str
        ``"SPDC"`` (``chi`` is chi2, in m/V) or ``"SFWM"`` (``chi`` is chi3,
        in m^2/V^2).
    omega_c : float
        Pump carrier angular frequency [rad/s].
    chi : float
        Nonlinear susceptibility; zero is allowed and gives ``g = 0``.
    n_bar : float
        Mean refractive index of the ring.
    V_ring : float
        Ring mode volume [m^3].
    """
    process = Process(process)
    if omega_c <= 0:
        raise ValidationError(f"omega_c must be > 0, got {omega_c}")
    if n_bar <= 0:
        raise ValidationError(f"n_bar must be > 0, got {n_bar}")
    if V_ring <= 0:
        raise ValidationError(f"V_ring must be > 0, got {V_ring}")
    if chi < 0:
        raise ValidationError(f"susceptibility must be >= 0, got {chi}")
    photon_energy = constants.hbar * omega_c
    power = 1.5 if process is Process.SPDC else 2.0
    return 3.0 * photon_energy**power * chi / (4.0 * constants.epsilon_0 * n_bar**4 * V_ring)


@dataclass(frozen=True)
class ModeParams:
    """One ring mode.

    ``rho`` and ``alpha`` are stored directly so that sweeps over them are
    exact; the rates are recovered from them on demand.  Use
    :meth:`from_rates` to build a mode from physical decay rates.
    """

    label: ModeLabel
    T: float
    rho: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "label", ModeLabel(self.label))
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValidationError(f"{self.label.value}: round-trip time T must be > 0, got {self.T}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError(f"{self.label.value}: rho must lie in [0, 1], got {self.rho}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"{self.label.value}: alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def from_rates(cls, label, T, gamma, gamma_int):
        return cls(label, T, derive_coupling(gamma, T), derive_coupling(gamma_int, T))

    @property
    def tau(self):
        return cross_coupling(self.rho)

    @property
    def gamma(self):
        """Coupling-loss rate (``inf`` when ``rho == 0``)."""
        return math.inf if self.rho == 0 else -2.0 * math.log(self.rho) / self.T

    @property
    def gamma_int(self):
        """Internal propagation-loss rate."""
        return math.inf if self.alpha == 0 else -2.0 * math.log(self.alpha) / self.T


@dataclass(frozen=True)
class PumpConfig:
    """Classical pump driving the pair generation.

    ``alpha_p_mag`` and ``theta_p`` are the magnitude and phase of the pump
    field inside the ring.  For SFWM two pump photons are annihilated, so the
    effective pump entering the Hamiltonian is the square of that field.
    """

    process: Process = Process.SPDC
    g: float = 0.0
    alpha_p_mag: float = 0.0
    theta_p: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        if self.alpha_p_mag < 0:
            raise ValidationError(f"pump amplitude magnitude must be >= 0, got {self.alpha_p_mag}")
        if not math.isfinite(self.g):
            raise ValidationError(f"nonlinear gain must be finite, got {self.g}")

    @property
    def effective_amplitude(self):
        field_ = self.alpha_p_mag * complex(math.cos(self.theta_p), math.sin(self.theta_p))
        return field_ if self.process is Process.SPDC else field_ * field_

    @property
    def coupling(self):
        """Complex pump coupling rate ``g * alpha_p``."""
        return self.g * self.effective_amplitude

    @property
    def phase(self):
        """Phase of the effective pump; this is the phase carried by the pair state."""
        return self.theta_p if self.process is Process.SPDC else 2.0 * self.theta_p


@dataclass(frozen=True)
class Detuning:
    """Angular-frequency offset from the carrier; phases are derived per mode."""

    omega: float

    def theta(self, mode):
        return self.omega * mode.T


@dataclass(frozen=True)
class SystemConfig:
    signal: ModeParams
    idler: ModeParams
    pump: PumpConfig = field(default_factory=PumpConfig)
    pump_mode: ModeParams | None = None

    def __post_init__(self):
        if self.signal.label is not ModeLabel.SIGNAL or self.idler.label is not ModeLabel.IDLER:
            raise ValidationError("signal/idler modes carry the wrong labels")
        if self.pump_mode is None:
            object.__setattr__(self, "pump_mode", ModeParams(ModeLabel.PUMP, self.signal.T, self.signal.rho, 1.0))
        r = max(abs(self.r_a), abs(self.r_b))
        if r > WEAK_PUMP_THRESHOLD:
            warnings.warn(f"|r| = {r:.3g} exceeds the weak-pump threshold {WEAK_PUMP_THRESHOLD:g}",
                          WeakPumpWarning, stacklevel=3)

    @classmethod
    def symmetric(cls, rho, alpha, r, theta_p=0.0, T=1.0, process=Process.SPDC):
        """Identical signal and idler with ``|r_a| = |r_b| = r``."""
        return cls.build(rho, rho, alpha, alpha, r / T, T_a=T, T_b=T, theta_p=theta_p, process=process)

    @classmethod
    def build(cls, rho_a, rho_b, alpha_a, alpha_b, coupling, T_a=1.0, T_b=1.0, theta_p=0.0,
              process=Process.SPDC):
        """Build from coefficients and the pump coupling rate ``|g alpha_p|``.

        The pump field magnitude is fixed to one so that ``g`` carries the
        coupling; ``theta_p`` is the phase of the pump field.
        """
        if coupling < 0:
            raise ValidationError(f"pump coupling |g alpha_p| must be >= 0, got {coupling}")
        return cls(
            ModeParams(ModeLabel.SIGNAL, T_a, rho_a, alpha_a),
            ModeParams(ModeLabel.IDLER, T_b, rho_b, alpha_b),
            PumpConfig(process, g=float(coupling), alpha_p_mag=1.0, theta_p=theta_p),
        )

    @property
    def r_a(self):
        return self.pump.coupling * self.signal.T

    @property
    def r_b(self):
        return self.pump.coupling.conjugate() * self.idler.T

    @property
    def r_ab(self):
        """``|r_ab| = |g alpha_p| sqrt(T_a T_b)``."""
        return abs(self.pump.coupling) * math.sqrt(self.signal.T * self.idler.T)

    @property
    def is_symmetric(self):
        a, b = self.signal, self.idler
        return a.T == b.T and a.rho == b.rho and a.alpha == b.alpha

    def thetas(self, omega):
        omega = np.asarray(omega, dtype=float)
        return omega * self.signal.T, omega * self.idler.T


def pump_parameters(config):
    """Dimensionless pump parameters ``(r_a, r_b)``.

    ``r_a = g alpha_p T_a`` and ``r_b = g conj(alpha_p) T_b``, with
    ``alpha_p`` the pump field (SPDC) or its square (SFWM).
    """
    return config.r_a, config.r_b
