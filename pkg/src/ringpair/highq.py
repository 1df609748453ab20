"""High-Q (Langevin) limits of the exact ring formalism and their convergence.

In the high-Q regime ``rho_k ~ 1 - gamma_k T_k / 2``, ``alpha_k ~ 1 -
gamma'_k T_k / 2`` and ``e^{i omega T_k} ~ 1 + i omega T_k`` the circulation
factors become Lorentzians ``1 / ((s + Gamma_k / 2) T_k)`` with ``s = -i omega``
and ``Gamma_k = gamma_k + gamma'_k``.  This module evaluates those limit forms,
the pole structure of ``D(s)``, the chain of approximations to the pair rate,
and a convergence report comparing them with the exact expressions.

Entries whose signs or round-trip-time ratios were re-derived from the exact
matrices (rather than copied from a printed limit) are noted inline.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .commutators import commutators_closed_form, highq_commutator_limit
from .core import ModeLabel, ModeParams, PumpConfig, SystemConfig
from .errors import HighQRegimeWarning, ValidationError
from .observables import rate_record
from .transfer import Location, TransferPair, intracavity_transfer, output_transfer, rescaled_noise_matrix

# Regime parameters (gamma T, gamma' T, |omega| T, |r|) above this trigger a warning.
REGIME_WARN = 0.1
# Below this the regime is considered clean.
REGIME_CLEAN = 0.01


class Order(str, enum.Enum):
    FULL_HIGHQ = "full_highQ"
    FIRST_ORDER = "first_order"


class ChainStage(str, enum.Enum):
    POLE_FORM = "pole_form"
    HIGHQ_FORM = "highQ_form"
    LORENTZIAN_PRODUCT = "lorentzian_product"


@dataclass(frozen=True)
class LangevinParams:
    gamma_a: float
    gamma_int_a: float
    gamma_b: float
    gamma_int_b: float

    def __post_init__(self):
        for name in ("gamma_a", "gamma_int_a", "gamma_b", "gamma_int_b"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")
        if self.Gamma_a <= 0 or self.Gamma_b <= 0:
            raise ValidationError("total decay rates Gamma_k must be > 0")

    @classmethod
    def from_config(cls, config):
        a, b = config.signal, config.idler
        return cls(a.gamma, a.gamma_int, b.gamma, b.gamma_int)

    @property
    def Gamma_a(self):
        return self.gamma_a + self.gamma_int_a

    @property
    def Gamma_b(self):
        return self.gamma_b + self.gamma_int_b

    @property
    def Delta_a(self):
        return self.gamma_a - self.gamma_int_a

    @property
    def Delta_b(self):
        return self.gamma_b - self.gamma_int_b

    @staticmethod
    def s(omega):
        return -1j * np.asarray(omega, dtype=float)


@dataclass(frozen=True)
class PoleSet:
    """Poles of ``D(s)`` in decay-rate form: the zeros of ``D`` sit at ``-s_pm``."""

    s_plus: complex
    s_minus: complex
    pi_plus: float
    pi_minus: float
    residual_plus: float
    residual_minus: float
    D0: float


def regime_parameters(config, omega=0.0):
    a, b = config.signal, config.idler
    return {
        "gamma_T": max(a.gamma * a.T, b.gamma * b.T),
        "gamma_int_T": max(a.gamma_int * a.T, b.gamma_int * b.T),
        "omega_T": float(np.max(np.abs(omega))) * max(a.T, b.T),
        "r": max(abs(config.r_a), abs(config.r_b)),
    }


def check_regime(config, omega=0.0, stacklevel=3):
    """Warn (never raise) when the configuration is outside the high-Q regime."""
    params = regime_parameters(config, omega)
    worst = max(params, key=params.get)
    if not params[worst] < REGIME_WARN:
        warnings.warn(f"outside the high-Q regime: {worst} = {params[worst]:.3g} >= {REGIME_WARN}",
                      HighQRegimeWarning, stacklevel=stacklevel)
    return params


def highq_single_mode(gamma, gamma_int, omega):
    """High-Q single-mode response ``(G, |H|)``.

    ``|H| = sqrt(gamma gamma') / sqrt(omega^2 + (Gamma/2)^2)`` so that
    ``|G|^2 + |H|^2 = 1`` holds exactly.
    """
    omega = np.asarray(omega, dtype=float)
    Gamma, Delta = gamma + gamma_int, gamma - gamma_int
    if Gamma <= 0:
        return np.ones_like(omega, dtype=complex), np.zeros_like(omega)
    # numerator and denominator doubled so that subnormal rates do not underflow
    G = (2j * omega + Delta) / (-2j * omega + Gamma)
    H = 2 * math.sqrt(gamma) * math.sqrt(gamma_int) / np.hypot(2 * omega, Gamma)
    return G, H


def highq_denominator(config, omega):
    lp = LangevinParams.from_config(config)
    s = lp.s(omega)
    return (s + lp.Gamma_a / 2) * (s + lp.Gamma_b / 2) - abs(config.pump.coupling) ** 2


def highq_matrices(config, omega, order=Order.FIRST_ORDER, check=True) -> TransferPair:
    """High-Q ``G`` and rescaled noise matrix ``H~`` at the bus output.

    ``full_highQ`` keeps the ``|g alpha_p|^2`` term of ``D~(s)`` and the
    square-bracket round-trip corrections; ``first_order`` is accurate to
    ``O(|g alpha_p|)``.  The off-diagonal entries carry ``sqrt(T_a/T_b)``
    on ``ab`` and ``sqrt(T_b/T_a)`` on ``ba`` with signs ``-i`` / ``+i``;
    this is what expanding the exact entries gives (``G_ab`` is
    proportional to ``r_a = g alpha_p T_a``).
    """
    order = Order(order)
    if check:
        check_regime(config, omega, stacklevel=3)
    lp = LangevinParams.from_config(config)
    omega = np.asarray(omega, dtype=float)
    s = lp.s(omega)
    c = config.pump.coupling
    c2 = abs(c) ** 2
    T_a, T_b = config.signal.T, config.idler.T
    la, lb = s + lp.Gamma_a / 2, s + lp.Gamma_b / 2
    ratio_ab, ratio_ba = math.sqrt(T_a / T_b), math.sqrt(T_b / T_a)
    g_gg = math.sqrt(lp.gamma_a * lp.gamma_b)
    shape = omega.shape
    G = np.empty(shape + (2, 2), dtype=complex)
    H = np.empty(shape + (2, 2), dtype=complex)
    if order is Order.FULL_HIGHQ:
        D = la * lb - c2
        G[..., 0, 0] = ((-s + lp.Delta_a / 2) * lb + c2 * (1 - lp.gamma_a * T_a / 2)) / D
        G[..., 0, 1] = -1j * c * g_gg * ratio_ab * (1 - (s + lp.gamma_int_b / 2) * T_b) / D
        G[..., 1, 0] = 1j * np.conj(c) * g_gg * ratio_ba * (1 - (s + lp.gamma_int_a / 2) * T_a) / D
        G[..., 1, 1] = ((-s + lp.Delta_b / 2) * la + c2 * (1 - lp.gamma_b * T_b / 2)) / D
        H[..., 0, 0] = math.sqrt(lp.gamma_a * lp.gamma_int_a) * lb / D
        H[..., 1, 1] = math.sqrt(lp.gamma_b * lp.gamma_int_b) * la / D
    else:
        D = la * lb
        G[..., 0, 0] = (-s + lp.Delta_a / 2) / la
        G[..., 0, 1] = -1j * c * g_gg * ratio_ab / D
        G[..., 1, 0] = 1j * np.conj(c) * g_gg * ratio_ba / D
        G[..., 1, 1] = (-s + lp.Delta_b / 2) / lb
        H[..., 0, 0] = math.sqrt(lp.gamma_a * lp.gamma_int_a) / la
        H[..., 1, 1] = math.sqrt(lp.gamma_b * lp.gamma_int_b) / lb
    H[..., 0, 1] = -1j * c * math.sqrt(lp.gamma_a * lp.gamma_int_b) * ratio_ab / D
    H[..., 1, 0] = 1j * np.conj(c) * math.sqrt(lp.gamma_b * lp.gamma_int_a) * ratio_ba / D
    return TransferPair(G, H, D + 0j * omega, Location.OUTPUT_BUS)


def exact_rescaled_pair(config, omega) -> TransferPair:
    """Exact ``G`` and ``H~ = H Lambda_alpha`` for comparison with :func:`highq_matrices`."""
    pair = output_transfer(config, omega)
    return TransferPair(pair.G, rescaled_noise_matrix(config, pair.H), pair.D, pair.location)


def _quadratic_roots(u_a, u_b, c2):
    """Roots (decay-rate form) of ``(s + u_a)(s + u_b) - c2`` negated: ``s_pm``."""
    mean = 0.5 * (u_a + u_b)
    rad = np.sqrt(complex((0.5 * (u_a - u_b)) ** 2 + c2))
    return mean + rad, mean - rad


def transcendental_D(config, s):
    """``D(s) = (1 - rho_a alpha_a e^{-s T_a})(1 - rho_b alpha_b e^{-s T_b}) - |g alpha_p|^2 T_a T_b``."""
    a, b = config.signal, config.idler
    s = np.asarray(s, dtype=complex)
    return ((1 - a.rho * a.alpha * np.exp(-s * a.T)) * (1 - b.rho * b.alpha * np.exp(-s * b.T))
            - abs(config.pump.coupling) ** 2 * a.T * b.T)


def poles(config) -> PoleSet:
    """Quadratic-approximation poles, their high-Q limits and transcendental residuals.

    With ``e^{-s T} ~ 1 - s T``, ``D(s) ~ T_a T_b x_a x_b [(s + y_a/x_a)(s + y_b/x_b)
    - |g alpha_p|^2 / (x_a x_b)]`` where ``x_k = rho_k alpha_k`` and
    ``y_k = (1 - x_k) / T_k``.  The roots are returned as the positive decay
    rates ``s_pm``; ``D`` vanishes at ``-s_pm``.  Residuals are
    ``|D(-s_pm)| / |D(0)|``.
    """
    a, b = config.signal, config.idler
    x_a, x_b = a.rho * a.alpha, b.rho * b.alpha
    if x_a == 0 or x_b == 0:
        raise ValidationError("poles are undefined when rho_k * alpha_k = 0")
    y_a, y_b = (1 - x_a) / a.T, (1 - x_b) / b.T
    c2 = abs(config.pump.coupling) ** 2
    s_p, s_m = _quadratic_roots(y_a / x_a, y_b / x_b, c2 / (x_a * x_b))
    lp = LangevinParams.from_config(config)
    pi_p, pi_m = _quadratic_roots(lp.Gamma_a / 2, lp.Gamma_b / 2, c2)
    D0 = abs(complex(transcendental_D(config, 0.0)))
    scale = D0 if D0 > 0 else 1.0
    return PoleSet(s_p, s_m, pi_p.real, pi_m.real,
                   abs(complex(transcendental_D(config, -s_p))) / scale,
                   abs(complex(transcendental_D(config, -s_m))) / scale, D0)


def quadratic_pole_residual(config, pole_set=None):
    """Scale-relative residual of the quadratic approximation at its own roots."""
    pole_set = pole_set or poles(config)
    a, b = config.signal, config.idler
    x_a, x_b = a.rho * a.alpha, b.rho * b.alpha
    u_a, u_b = (1 - x_a) / (a.T * x_a), (1 - x_b) / (b.T * x_b)
    c2 = abs(config.pump.coupling) ** 2 / (x_a * x_b)
    out = []
    for s in (pole_set.s_plus, pole_set.s_minus):
        q = (-s + u_a) * (-s + u_b) - c2
        scale = max(abs(u_a * u_b), abs(s) ** 2, c2, 1e-300)
        out.append(abs(q) / scale)
    return max(out)


def rate_highq_chain(config, omega, stage=ChainStage.LORENTZIAN_PRODUCT):
    """Successive approximations to the intracavity pair rate ``R_ab``.

    ``pole_form`` keeps the circulation numerators and the quadratic poles;
    ``highQ_form`` replaces them by their Langevin limits; ``lorentzian_product``
    is the ``O(|g alpha_p|^2)`` product of two Lorentzians.  In ``pole_form``
    the pole denominator appears once per factor, and the second factor's
    numerator uses ``|1 - rho_a xi_a|``, the ``aa`` circulation factor.
    """
    stage = ChainStage(stage)
    omega = np.asarray(omega, dtype=float)
    c2 = abs(config.pump.coupling) ** 2
    lp = LangevinParams.from_config(config)
    w2 = omega ** 2
    if stage is ChainStage.LORENTZIAN_PRODUCT:
        return c2 * lp.gamma_a / (w2 + (lp.Gamma_a / 2) ** 2) * lp.gamma_b / (w2 + (lp.Gamma_b / 2) ** 2)
    if stage is ChainStage.HIGHQ_FORM:
        pp, pm = _quadratic_roots(lp.Gamma_a / 2, lp.Gamma_b / 2, c2)
        den = (w2 + pp.real ** 2) * (w2 + pm.real ** 2)
        return (c2 * lp.gamma_a * (w2 + (lp.Gamma_b / 2) ** 2) / den
                * lp.gamma_b * (w2 + (lp.Gamma_a / 2) ** 2) / den)
    a, b = config.signal, config.idler
    ps = poles(config)
    theta_a, theta_b = config.thetas(omega)
    xi_a = a.alpha * np.exp(1j * theta_a)
    xi_b = b.alpha * np.exp(1j * theta_b)
    den = (w2 + ps.s_plus.real ** 2) * (w2 + ps.s_minus.real ** 2)
    fa = (a.tau ** 2 / a.T) * np.abs((1 - b.rho * xi_b) / b.T) ** 2 * np.abs(xi_a) ** 2 / den
    fb = (b.tau ** 2 / b.T) * np.abs((1 - a.rho * xi_a) / a.T) ** 2 * np.abs(xi_b) ** 2 / den
    return c2 * fa * fb


def highq_rate_limits(config, omega):
    """Langevin-limit CAR and heralding efficiency at the bus and inside the ring."""
    lp = LangevinParams.from_config(config)
    w2 = np.asarray(omega, dtype=float) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ka = lp.gamma_a * lp.gamma_int_a / (w2 + (lp.Delta_a / 2) ** 2)
        kb = lp.gamma_b * lp.gamma_int_b / (w2 + (lp.Delta_b / 2) ** 2)
        car_out = 1.0 / (ka + kb)
        herald_out = 1.0 / (1.0 + kb)
        car_mrr = (lp.gamma_a * lp.gamma_b / (lp.gamma_a * lp.gamma_int_b + lp.gamma_b * lp.gamma_int_a)
                   + 0.0 * w2)
    herald_mrr = lp.gamma_b / lp.Gamma_b + 0.0 * w2
    return {"car_out": car_out, "herald_out": herald_out, "car_mrr": car_mrr, "herald_mrr": herald_mrr}


def langevin_boundary_residual(mode: ModeParams, omega):
    """Distance of the exact single-mode boundary relation from ``a_out = sqrt(gamma) a - a_in``.

    The cavity field is rescaled as ``a = sqrt(T) a(L-)``.  Both the input
    coefficient and the (``Lambda_alpha``-rescaled) noise coefficient are
    compared; the residual is ``O(gamma T)``.
    """
    cfg = SystemConfig(ModeParams(ModeLabel.SIGNAL, mode.T, mode.rho, mode.alpha),
                       ModeParams(ModeLabel.IDLER, mode.T, mode.rho, mode.alpha), PumpConfig())
    out = output_transfer(cfg, omega)
    cav = intracavity_transfer(cfg, omega)
    sg = math.sqrt(mode.gamma * mode.T)
    lam = math.sqrt(1.0 - mode.alpha ** 2)
    g_res = np.abs(out.G[..., 0, 0] - (sg * cav.G[..., 0, 0] - 1.0))
    h_res = np.abs(out.H[..., 0, 0] - sg * cav.H[..., 0, 0]) * lam
    return float(np.max(np.maximum(g_res, h_res)))


def halving_grid(gamma_a, gamma_int_a, gamma_b, gamma_int_b, coupling, T0=1e-2, points=4, T_ratio=1.0,
                 theta_p=0.0):
    """Configurations with fixed rates and ``T_a = T0 / 2^k``, ``T_b = T_ratio T_a``."""
    if points < 1:
        raise ValidationError("a halving grid needs at least one point")
    grid = []
    for k in range(points):
        T_a = T0 / 2 ** k
        T_b = T_ratio * T_a
        grid.append(SystemConfig(
            ModeParams.from_rates(ModeLabel.SIGNAL, T_a, gamma_a, gamma_int_a),
            ModeParams.from_rates(ModeLabel.IDLER, T_b, gamma_b, gamma_int_b),
            PumpConfig(g=float(coupling), alpha_p_mag=1.0, theta_p=theta_p)))
    return grid


def _rel(exact, approx):
    exact = np.asarray(exact)
    approx = np.asarray(approx)
    diff = np.abs(exact - approx)
    scale = np.abs(approx)
    with np.errstate(divide="ignore", invalid="ignore"):
        both_inf = np.isinf(exact) & np.isinf(approx)
        r = np.where(diff == 0, 0.0, diff / np.where(scale > 0, scale, np.abs(exact)))
        r = np.where(both_inf, 0.0, r)
    return float(np.max(r))


@dataclass
class LimitReport:
    """Relative errors (exact vs limit form) along a grid and fitted convergence orders."""

    T: list
    omega: float
    errors: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)
    monotone: dict = field(default_factory=dict)

    QUANTITIES = ("G_diag", "G_offdiag", "Htilde_diag", "Htilde_offdiag", "C_kk", "R_ab",
                  "car_out", "herald_out", "car_mrr", "herald_mrr", "pole_residual", "langevin_bc")


def fit_order(T, errors):
    """Least-squares slope of ``log(error)`` against ``log(T)``; ``None`` if any error is zero."""
    T = np.asarray(T, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(T) < 3:
        raise ValidationError("convergence-order fitting needs at least 3 grid points")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        return None
    return float(np.polyfit(np.log(T), np.log(e), 1)[0])


def _point_errors(config, omega):
    out = {}
    ex = exact_rescaled_pair(config, omega)
    lim = highq_matrices(config, omega, Order.FIRST_ORDER, check=False)
    diag = [(0, 0), (1, 1)]
    off = [(0, 1), (1, 0)]
    out["G_diag"] = max(_rel(ex.G[..., i, j], lim.G[..., i, j]) for i, j in diag)
    out["G_offdiag"] = max(_rel(ex.G[..., i, j], lim.G[..., i, j]) for i, j in off)
    out["Htilde_diag"] = max(_rel(ex.H[..., i, j], lim.H[..., i, j]) for i, j in diag)
    out["Htilde_offdiag"] = max(_rel(ex.H[..., i, j], lim.H[..., i, j]) for i, j in off)
    comms = commutators_closed_form(config)
    c_lim = highq_commutator_limit(config)
    out["C_kk"] = max(_rel(comms.C_aa, c_lim[0]), _rel(comms.C_bb, c_lim[1]))
    rec_mrr = rate_record(config, omega, Location.INTRACAVITY)
    out["R_ab"] = _rel(rec_mrr.pair_rate, rate_highq_chain(config, omega, ChainStage.LORENTZIAN_PRODUCT))
    rec_out = rate_record(config, omega, Location.OUTPUT_BUS)
    limits = highq_rate_limits(config, omega)
    out["car_out"] = _rel(rec_out.car, limits["car_out"])
    out["herald_out"] = _rel(rec_out.herald, limits["herald_out"])
    out["car_mrr"] = _rel(rec_mrr.car, limits["car_mrr"])
    out["herald_mrr"] = _rel(rec_mrr.herald, limits["herald_mrr"])
    ps = poles(config)
    out["pole_residual"] = max(ps.residual_plus, ps.residual_minus)
    out["langevin_bc"] = max(langevin_boundary_residual(config.signal, omega),
                             langevin_boundary_residual(config.idler, omega))
    return out


def limit_report(config_grid, omega=0.3) -> LimitReport:
    """Compare exact quantities with their high-Q limit forms along ``config_grid``.

    The grid should shrink the regime parameters (normally a T-halving grid
    at fixed rates); at least 3 points are required for order fitting.
    """
    config_grid = list(config_grid)
    if len(config_grid) < 3:
        raise ValidationError(f"limit_report needs at least 3 grid points, got {len(config_grid)}")
    T = [cfg.signal.T for cfg in config_grid]
    report = LimitReport(T=T, omega=float(omega))
    rows = [_point_errors(cfg, omega) for cfg in config_grid]
    for q in LimitReport.QUANTITIES:
        errs = [row[q] for row in rows]
        report.errors[q] = errs
        report.orders[q] = fit_order(T, errs)
        report.monotone[q] = bool(all(e1 <= e0 for e0, e1 in zip(errs, errs[1:])))
    return report
