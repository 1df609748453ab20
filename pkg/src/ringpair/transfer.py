"""Transfer functions of the single-bus ring.

Single-mode responses, the pump field inside and after the ring, and the
coupled signal/idler matrices.  The bus output obeys

    a_out = G a_in + H f

and the field just before the coupler, ``a(L-)``, obeys the same relation
with ``G^(L) = X_tau^-1 H P_xi X_tau`` and ``H^(L) = X_tau^-1 H``.  The
vectors are ``(a, b^dagger)``.

Sign convention: the decoupled diagonal entries are
``(xi - rho) / (1 - rho xi)``.  This differs by an overall pi phase from the
``rho - alpha e^{i theta}`` form of the reflection-convention expression;
every shipped observable is a squared magnitude and is unaffected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import ModeParams
from .errors import PoleError, ValidationError

# |D| below this is treated as a pole.
POLE_TOLERANCE = 1e-14


class Location(str, enum.Enum):
    OUTPUT_BUS = "output_bus"
    INTRACAVITY = "intracavity"


@dataclass(frozen=True)
class TransferPair:
    """``G`` and ``H`` (each ``(..., 2, 2)``) with the denominator ``D``.

    For high-Q limit forms ``H`` holds the rescaled noise matrix and ``D``
    the rate-unit denominator ``D~(s)``.
    """

    G: np.ndarray
    H: np.ndarray
    D: np.ndarray
    location: Location = Location.OUTPUT_BUS

    def __post_init__(self):
        object.__setattr__(self, "location", Location(self.location))
        d = np.abs(self.D)
        if np.any(~(d > POLE_TOLERANCE)):
            raise PoleError(f"transfer denominator vanishes (min |D| = {np.nanmin(d):.3g})")


@dataclass(frozen=True)
class BuildingBlocks:
    """Matrices of the coupled linear system ``M a(L-) = P_xi a(0+) + f``."""

    M: np.ndarray
    P_xi: np.ndarray
    T_rho: np.ndarray
    X_tau: np.ndarray
    xi_a: np.ndarray
    xi_b: np.ndarray


def circulation_factor(rho, alpha, theta):
    """Geometric sum over round trips, ``1 / (1 - rho alpha e^{i theta})``."""
    rho = np.asarray(rho, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(rho * alpha >= 1.0):
        raise PoleError("rho*alpha >= 1: circulating field does not decay")
    return 1.0 / (1.0 - rho * alpha * np.exp(1j * np.asarray(theta, dtype=float)))


def lossless_transfer(rho, theta):
    """All-pass response ``e^{i theta} (1 - rho e^{-i theta}) / (1 - rho e^{i theta})``."""
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any((rho < 0) | (rho > 1)):
        raise ValidationError("rho must lie in [0, 1]")
    e = np.exp(1j * theta)
    den = 1.0 - rho * e
    if np.any(np.abs(den) <= POLE_TOLERANCE):
        raise PoleError("lossless ring evaluated on resonance with rho = 1")
    return e * (1.0 - rho * np.conj(e)) / den


def classical_lossy_transfer(rho, alpha, theta):
    """Through-port response with internal loss, ``(alpha e^{i theta} - rho) / (1 - rho alpha e^{i theta})``."""
    rho = np.asarray(rho, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any((rho < 0) | (rho > 1) | (alpha < 0) | (alpha > 1)):
        raise ValidationError("rho and alpha must lie in [0, 1]")
    x = alpha * np.exp(1j * np.asarray(theta, dtype=float))
    den = 1.0 - rho * x
    if np.any(np.abs(den) <= POLE_TOLERANCE):
        raise PoleError("lossy ring evaluated at rho*alpha = 1 on resonance")
    return (x - rho) / den


def single_mode_noise_magnitude(G):
    """``|H| = sqrt(1 - |G|^2)``, the noise weight that restores unitarity."""
    g2 = np.abs(np.asarray(G)) ** 2
    if np.any(g2 > 1.0 + 1e-12):
        raise ValidationError("|G| > 1: transfer function violates unitarity")
    return np.sqrt(np.clip(1.0 - g2, 0.0, None))


def pump_in_ring(mode_c: ModeParams, theta_c, c_in, point="entry_0plus"):
    """Lossless pump amplitude just after entry (``0+``) or before exit (``L-``)."""
    e = np.exp(1j * np.asarray(theta_c, dtype=float))
    den = 1.0 - mode_c.rho * e
    if np.any(np.abs(den) <= POLE_TOLERANCE):
        raise PoleError("pump resonance with rho_c = 1")
    field = mode_c.tau / den * c_in
    if point == "entry_0plus":
        return field
    if point == "exit_Lminus":
        return field * e
    raise ValidationError(f"unknown pump point {point!r}")


def pump_out(mode_c: ModeParams, theta_c, c_in):
    return lossless_transfer(mode_c.rho, theta_c) * c_in


def building_blocks(config, omega) -> BuildingBlocks:
    a, b = config.signal, config.idler
    theta_a, theta_b = config.thetas(omega)
    xi_a = a.alpha * np.exp(1j * theta_a)
    xi_b = b.alpha * np.exp(1j * theta_b)
    shape = np.shape(xi_a)
    r_a, r_b = config.r_a, config.r_b
    M = np.empty(shape + (2, 2), dtype=complex)
    M[..., 0, 0] = 1.0
    M[..., 0, 1] = 1j * r_a
    M[..., 1, 0] = -1j * r_b
    M[..., 1, 1] = 1.0
    P = np.zeros(shape + (2, 2), dtype=complex)
    P[..., 0, 0] = xi_a
    P[..., 1, 1] = xi_b
    T_rho = np.zeros(shape + (2, 2), dtype=complex)
    T_rho[..., 0, 0] = a.rho
    T_rho[..., 1, 1] = b.rho
    X = np.zeros(shape + (2, 2), dtype=complex)
    X[..., 0, 0] = a.tau
    X[..., 1, 1] = b.tau
    return BuildingBlocks(M, P, T_rho, X, xi_a, xi_b)


def point_inputs(config, omega):
    """Kernel argument tuple for one configuration over the detuning(s) ``omega``."""
    a, b = config.signal, config.idler
    theta_a, theta_b = config.thetas(omega)
    return (theta_a, theta_b, a.rho, b.rho, a.tau, b.tau, a.alpha, b.alpha, config.r_a, config.r_b)


def _split(raw, location, shape):
    k = 0 if location is Location.OUTPUT_BUS else 8
    G = raw[..., k:k + 4].reshape(shape + (2, 2))
    H = raw[..., k + 4:k + 8].reshape(shape + (2, 2))
    return TransferPair(G, H, raw[..., 16], location)


def transfer_from_inputs(inputs, location=Location.OUTPUT_BUS):
    """Closed-form transfer pair for raw kernel inputs (used by the sweep engine)."""
    location = Location(location)
    if location is Location.INTRACAVITY and np.any(np.asarray(inputs[4]) * np.asarray(inputs[5]) == 0):
        raise ValidationError("tau = 0: the intracavity field is not defined by the bus relation")
    raw = _kernels.transfer(*inputs)
    return _split(raw, location, raw.shape[:-1])


def output_transfer(config, omega) -> TransferPair:
    """Bus-output ``G(omega)``, ``H(omega)`` and ``D(omega)``.

    Works for scalar or array ``omega``; matrices have shape ``omega.shape + (2, 2)``.
    """
    return transfer_from_inputs(point_inputs(config, omega), Location.OUTPUT_BUS)


def intracavity_transfer(config, omega) -> TransferPair:
    """``G^(L)``, ``H^(L)`` relating ``a(L-)`` to the inputs and noise."""
    return transfer_from_inputs(point_inputs(config, omega), Location.INTRACAVITY)


def composition_transfer(config, omega, location=Location.OUTPUT_BUS) -> TransferPair:
    """Same matrices built by explicit matrix products and a numerical inverse.

    Independent of the closed-form entries; used to cross-check them.
    """
    location = Location(location)
    bb = building_blocks(config, omega)
    H = bb.X_tau @ np.linalg.inv(bb.M - bb.P_xi @ bb.T_rho)
    D = np.linalg.det(bb.M - bb.P_xi @ bb.T_rho)
    if location is Location.OUTPUT_BUS:
        return TransferPair(H @ bb.P_xi @ bb.X_tau - bb.T_rho, H, D, location)
    if config.signal.tau == 0 or config.idler.tau == 0:
        raise ValidationError("tau = 0: the intracavity field is not defined by the bus relation")
    X_inv = np.linalg.inv(bb.X_tau)
    return TransferPair(X_inv @ H @ bb.P_xi @ bb.X_tau, X_inv @ H, D, location)


def unitarity_identity_residual(config, omega, pair=None):
    """Entrywise relative residual of ``G = H P_xi X_tau - T_rho``.

    Each entry's residual is scaled by the largest magnitude among the three
    terms of the identity, so cancellation near critical coupling does not
    inflate it.
    """
    if pair is None:
        pair = output_transfer(config, omega)
    bb = building_blocks(config, omega)
    hpx = pair.H @ bb.P_xi @ bb.X_tau
    scale = np.maximum(np.maximum(np.abs(pair.G), np.abs(hpx)), np.abs(bb.T_rho))
    scale = np.where(scale > 0, scale, 1.0)
    return np.abs(pair.G - (hpx - bb.T_rho)) / scale


def rescaled_noise_matrix(config, H):
    """``H~ = H Lambda_alpha`` with ``Lambda_alpha = diag(sqrt(1 - alpha_k^2))``."""
    lam = np.array([np.sqrt(1.0 - config.signal.alpha ** 2), np.sqrt(1.0 - config.idler.alpha ** 2)])
    return np.asarray(H) * lam[..., None, :]


__all__ = [
    "Location", "TransferPair", "BuildingBlocks", "circulation_factor", "lossless_transfer",
    "classical_lossy_transfer", "single_mode_noise_magnitude", "pump_in_ring", "pump_out",
    "building_blocks", "output_transfer", "intracavity_transfer", "composition_transfer",
    "unitarity_identity_residual", "rescaled_noise_matrix",
]
