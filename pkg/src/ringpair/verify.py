"""Invariant suite behind ``ringpair verify``.

Every invariant is a function ``check(ctx) -> (max_residual, tolerance)``
registered with :func:`invariant`.  ``fast`` runs 100 random configurations
with a fixed seed; ``full`` runs 1000 and adds the high-Q convergence
studies.  A check passes when its residual is finite and within tolerance.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .commutators import (assemble_commutator_system, commutator_residual, commutators_closed_form,
                          highq_commutator_limit, solve_commutators_numeric)
from .core import ModeLabel, ModeParams, PumpConfig, SystemConfig, cross_coupling
from .errors import RingPairError
from .highq import (LangevinParams, Order, _quadratic_roots, fit_order, halving_grid, highq_matrices,
                    highq_single_mode, langevin_boundary_residual, limit_report, poles, quadratic_pole_residual)
from .observables import (biphoton_state, closed_form_car, closed_form_herald, psi2_mrr_closed_form,
                          rate_record)
from .transfer import (Location, building_blocks, circulation_factor, classical_lossy_transfer, composition_transfer,
                       intracavity_transfer, output_transfer, unitarity_identity_residual)

SEED = 20240601
LEVELS = {"fast": 100, "full": 1000}

_REGISTRY = []


@dataclass
class Result:
    name: str
    residual: float
    tolerance: float
    passed: bool
    seconds: float
    error: str = ""


@dataclass
class Context:
    rng: np.random.Generator
    n: int
    full: bool
    configs: list


def invariant(name, full_only=False):
    def deco(fn):
        _REGISTRY.append((name, fn, full_only))
        return fn
    return deco


def registry():
    return [(name, full_only) for name, _, full_only in _REGISTRY]


def random_configs(rng, n, r_max=1e-3):
    """Random valid configurations: rho in [0, 0.99], alpha in [0.5, 1], T in [0.5, 2], |r| <= r_max."""
    out = []
    for _ in range(n):
        T_a, T_b = rng.uniform(0.5, 2.0, size=2)
        rho_a, rho_b = rng.uniform(0.0, 0.99, size=2)
        alpha_a, alpha_b = rng.uniform(0.5, 1.0, size=2)
        coupling = rng.uniform(0.0, r_max) / max(T_a, T_b)
        out.append(SystemConfig.build(rho_a, rho_b, alpha_a, alpha_b, coupling, T_a=T_a, T_b=T_b,
                                      theta_p=rng.uniform(0, 2 * np.pi)))
    return out


def _omegas(rng, k=5):
    return rng.uniform(-np.pi, np.pi, size=k)


def _relerr(a, b, floor=0.0):
    a, b = np.asarray(a), np.asarray(b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    diff = np.abs(a - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(diff == 0, 0.0, diff / scale)


def _maxf(values):
    vals = [float(np.max(v)) for v in values]
    return max(vals) if vals else 0.0


# ---------------------------------------------------------------------------
# resonator-core / transfer-functions


@invariant("core: rho^2 + tau^2 = 1")
def _inv_coupler(ctx):
    rho = ctx.rng.uniform(0, 1, size=ctx.n)
    return float(np.max(np.abs(rho ** 2 + cross_coupling(rho) ** 2 - 1))), 1e-14


@invariant("transfer: G = H P_xi X_tau - T_rho (relative)")
def _inv_gh(ctx):
    return _maxf(unitarity_identity_residual(cfg, _omegas(ctx.rng)) for cfg in ctx.configs), 1e-12


@invariant("transfer: closed form vs matrix composition (G, H, G^L, H^L)")
def _inv_composition(ctx):
    res = []
    for cfg in ctx.configs:
        om = _omegas(ctx.rng)
        for loc in (Location.OUTPUT_BUS, Location.INTRACAVITY):
            closed = output_transfer(cfg, om) if loc is Location.OUTPUT_BUS else intracavity_transfer(cfg, om)
            comp = composition_transfer(cfg, om, loc)
            # bus G_kk cancels near critical coupling; scale by the terms of G = H P X - T_rho
            floor = np.abs(comp.G + building_blocks(cfg, om).T_rho) if loc is Location.OUTPUT_BUS else 0.0
            res.append(_relerr(closed.G, comp.G, floor))
            res.append(_relerr(closed.H, comp.H))
    return _maxf(res), 1e-12


@invariant("transfer: lossless decoupled |G_kk| = 1")
def _inv_unimodular(ctx):
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    res = []
    for rho in ctx.rng.uniform(0, 0.99, size=max(ctx.n // 10, 5)):
        cfg = SystemConfig.build(rho, rho, 1.0, 1.0, 0.0)
        G = output_transfer(cfg, theta).G
        res.append(np.abs(np.abs(G[..., 0, 0]) - 1))
        res.append(np.abs(np.abs(G[..., 1, 1]) - 1))
    return _maxf(res), 1e-12


@invariant("transfer: 2 pi periodicity in theta")
def _inv_periodic(ctx):
    res = []
    for cfg in ctx.configs[: max(ctx.n // 5, 10)]:
        a = SystemConfig.build(cfg.signal.rho, cfg.idler.rho, cfg.signal.alpha, cfg.idler.alpha,
                               abs(cfg.pump.coupling))
        om = _omegas(ctx.rng)
        p0, p1 = output_transfer(a, om), output_transfer(a, om + 2 * np.pi)
        res.append(_relerr(p0.G, p1.G, np.abs(p0.G + building_blocks(a, om).T_rho)))
        res.append(_relerr(p0.H, p1.H))
    return _maxf(res), 1e-10


# Exactly, |1/D - S_a S_b| = |r_a r_b| |S_a S_b|^2 / |1 - r_a r_b S_a S_b| <= |r_a r_b| |S_a S_b|^2 / (1 - eps)
# holds where |r_a r_b S_a S_b| <= eps.
LOWEST_ORDER_REGIME = 0.1
# Absolute rounding allowance (relative to |S_a S_b|) for configurations with r_a r_b ~ 0.
ROUNDING_FLOOR = 1e-14


@invariant("transfer: 1/D - S_a S_b bounded by |r_a r_b| |S_a S_b|^2")
def _inv_lowest_order(ctx):
    ratios = []
    for cfg in ctx.configs:
        if cfg.pump.coupling == 0:
            continue
        om = _omegas(ctx.rng)
        th_a, th_b = cfg.thetas(om)
        s = circulation_factor(cfg.signal.rho, cfg.signal.alpha, th_a) * circulation_factor(
            cfg.idler.rho, cfg.idler.alpha, th_b)
        D = output_transfer(cfg, om).D
        rr = abs(cfg.r_a * cfg.r_b)
        small = rr * np.abs(s) <= LOWEST_ORDER_REGIME
        bound = rr * np.abs(s) ** 2 / (1.0 - LOWEST_ORDER_REGIME) + ROUNDING_FLOOR * np.abs(s)
        if np.any(small):
            ratios.append((np.abs(1 / D - s) / bound)[small])
    return _maxf(ratios), 1.0


@invariant("transfer: classical lossy ring |G| <= 1")
def _inv_lossy(ctx):
    rho = ctx.rng.uniform(0, 0.99, size=ctx.n)
    alpha = ctx.rng.uniform(0, 1, size=ctx.n)
    theta = ctx.rng.uniform(0, 2 * np.pi, size=ctx.n)
    return float(np.max(np.maximum(np.abs(classical_lossy_transfer(rho, alpha, theta)) - 1, 0.0))), 1e-14


# ---------------------------------------------------------------------------
# noise-commutators


@invariant("commutators: closed form solves the unitarity equations")
def _inv_comm_exact(ctx):
    res = []
    for cfg in ctx.configs:
        om = _omegas(ctx.rng)
        res.append(commutator_residual(output_transfer(cfg, om), commutators_closed_form(cfg, om)))
    return _maxf(res), 1e-12


@invariant("commutators: numeric 4x4 solve = closed form")
def _inv_comm_numeric(ctx):
    res = []
    for cfg in ctx.configs:
        om = _omegas(ctx.rng)
        pair = output_transfer(cfg, om)
        if np.max(np.linalg.cond(assemble_commutator_system(pair)[0])) > 1e8:
            continue
        num = solve_commutators_numeric(pair)
        cf = commutators_closed_form(cfg, om)
        res += [np.abs(num.C_aa - cf.C_aa), np.abs(num.C_bb - cf.C_bb), np.abs(num.D_ab - cf.D_ab),
                np.abs(num.C_ab)]
    return _maxf(res), 1e-10


@invariant("commutators: D_ab = 0 for equal round-trip times")
def _inv_dab_zero(ctx):
    res = []
    for cfg in ctx.configs[: max(ctx.n // 5, 10)]:
        eq = SystemConfig.build(cfg.signal.rho, cfg.idler.rho, cfg.signal.alpha, cfg.idler.alpha,
                                abs(cfg.pump.coupling), T_a=1.3, T_b=1.3, theta_p=cfg.pump.theta_p)
        res.append(np.abs(solve_commutators_numeric(output_transfer(eq, _omegas(ctx.rng))).D_ab))
    return _maxf(res), 1e-12


# ---------------------------------------------------------------------------
# biphoton-observables


@invariant("observables: psi2_mrr matrix path = closed form (relative)")
def _inv_psi2(ctx):
    theta = np.linspace(0, 2 * np.pi, 101)
    res = []
    for cfg in ctx.configs:
        om = theta / cfg.signal.T
        pair = intracavity_transfer(cfg, om)
        state = biphoton_state(pair, commutators_closed_form(cfg, om), cfg.pump.phase)
        res.append(_relerr(state.psi2, psi2_mrr_closed_form(cfg, om)))
    return _maxf(res), 1e-10


@invariant("observables: |psi2|^2, CAR, herald invariant under pump phase")
def _inv_phase(ctx):
    res = []
    for cfg in ctx.configs[: max(ctx.n // 5, 10)]:
        om = _omegas(ctx.rng)
        shifted = SystemConfig(cfg.signal, cfg.idler, PumpConfig(cfg.pump.process, cfg.pump.g, cfg.pump.alpha_p_mag,
                                                                 cfg.pump.theta_p + 1.234))
        for loc in (Location.OUTPUT_BUS, Location.INTRACAVITY):
            r0, r1 = rate_record(cfg, om, loc), rate_record(shifted, om, loc)
            for f in ("psi2_abs2", "car", "herald"):
                res.append(_relerr(getattr(r0, f), getattr(r1, f)))
    return _maxf(res), 1e-12


@invariant("observables: CAR_mrr independent of theta, herald_mrr of theta_b")
def _inv_theta_indep(ctx):
    theta = np.linspace(0, 2 * np.pi, 201, endpoint=False)
    res = []
    for cfg in ctx.configs:
        rec = rate_record(cfg, theta / cfg.signal.T, Location.INTRACAVITY)
        for f in (rec.car, rec.herald):
            res.append((np.max(f) - np.min(f)) / np.max(np.abs(f)))
    return _maxf(res), 1e-10


@invariant("observables: closed-form CAR_mrr / herald_mrr = matrix pipeline")
def _inv_closed_rates(ctx):
    res = []
    for cfg in ctx.configs:
        sym = SystemConfig.symmetric(cfg.signal.rho, cfg.signal.alpha, abs(cfg.r_a), theta_p=cfg.pump.theta_p)
        om = _omegas(ctx.rng)
        rec = rate_record(sym, om, Location.INTRACAVITY)
        res.append(_relerr(rec.car, closed_form_car(sym)))
        res.append(_relerr(rate_record(cfg, om, Location.INTRACAVITY).herald, closed_form_herald(cfg)))
    return _maxf(res), 1e-9


@invariant("observables: herald in [0, 1]")
def _inv_herald_range(ctx):
    worst = 0.0
    for cfg in ctx.configs:
        for loc in (Location.OUTPUT_BUS, Location.INTRACAVITY):
            h = rate_record(cfg, _omegas(ctx.rng), loc).herald
            worst = max(worst, float(np.max(np.maximum(-h, h - 1))))
    return max(worst, 0.0), 0.0


@invariant("observables: populations sum to 1 and p2/p1 = CAR")
def _inv_populations(ctx):
    res = []
    for cfg in ctx.configs:
        for loc in (Location.OUTPUT_BUS, Location.INTRACAVITY):
            rec = rate_record(cfg, _omegas(ctx.rng), loc)
            res.append(np.abs(rec.p0 + rec.p1a + rec.p1b + rec.p2 - 1))
            finite = np.isfinite(rec.car) & (rec.p1a + rec.p1b > 0)
            if np.any(finite):
                res.append(_relerr((rec.p2 / (rec.p1a + rec.p1b))[finite], rec.car[finite]))
    return _maxf(res), 1e-12


@invariant("observables: on-resonance |psi2_mrr|^2 increases with alpha")
def _inv_alpha_monotone(ctx):
    alphas = np.linspace(0.75, 0.999, 60)
    worst = 0.0
    for rho in ctx.rng.uniform(0.0, 0.99, size=max(ctx.n // 10, 5)):
        vals = np.array([rate_record(SystemConfig.symmetric(rho, a, 1e-5), 0.0, Location.INTRACAVITY).psi2_abs2
                         for a in alphas])
        worst = max(worst, float(np.max(np.maximum(vals[:-1] - vals[1:], 0.0) / vals[1:])))
    return worst, 0.0


@invariant("limits: lossless ring (alpha = 1, r = 0)")
def _inv_lossless(ctx):
    res = []
    for rho in ctx.rng.uniform(0, 0.99, size=max(ctx.n // 10, 5)):
        cfg = SystemConfig.build(rho, rho, 1.0, 1.0, 0.0)
        om = _omegas(ctx.rng)
        G = output_transfer(cfg, om).G
        res += [np.abs(np.abs(G[..., 0, 0]) - 1), np.abs(np.abs(G[..., 1, 1]) - 1)]
        c = commutators_closed_form(cfg, om)
        res += [np.abs(c.C_aa), np.abs(c.C_bb), np.abs(c.C_ab), np.abs(c.D_ab)]
        for loc in (Location.OUTPUT_BUS, Location.INTRACAVITY):
            rec = rate_record(cfg, om, loc)
            res.append(np.where(np.isposinf(rec.car), 0.0, np.inf))
            res.append(np.abs(rec.herald - 1))
    return _maxf(res), 1e-12


# ---------------------------------------------------------------------------
# highq-limit


@invariant("highq: quadratic poles are exact roots; pi_pm identities")
def _inv_poles(ctx):
    res = []
    rng = ctx.rng
    for _ in range(max(ctx.n // 5, 10)):
        T = rng.uniform(1e-3, 1e-2)
        g = rng.uniform(0, 1e-2)
        cfg = halving_grid(rng.uniform(0.1, 2), rng.uniform(0, 1), rng.uniform(0.1, 2), rng.uniform(0, 1), g,
                           T0=T, points=1, T_ratio=rng.uniform(0.5, 2))[0]
        ps = poles(cfg)
        res.append(quadratic_pole_residual(cfg, ps))
        lp = LangevinParams.from_config(cfg)
        pp, pm = _quadratic_roots(lp.Gamma_a / 2, lp.Gamma_b / 2, abs(cfg.pump.coupling) ** 2)
        res.append(abs(pp.real - ps.pi_plus) / abs(ps.pi_plus))
        res.append(abs(pm.real - ps.pi_minus) / max(abs(ps.pi_plus), 1e-300))
        sym = halving_grid(1.0, 0.3, 1.0, 0.3, g, T0=T, points=1)[0]
        sp = poles(sym)
        Gam = 1.3
        res.append(abs(sp.pi_plus - (Gam / 2 + g)) / Gam)
        res.append(abs(sp.pi_minus - (Gam / 2 - g)) / Gam)
    return _maxf(res), 1e-12


@invariant("highq: first-order diagonal unimodular without internal loss")
def _inv_highq_unimodular(ctx):
    res = []
    om = np.linspace(-5, 5, 41)
    for gamma in ctx.rng.uniform(0.1, 3.0, size=10):
        cfg = halving_grid(gamma, 0.0, gamma * 0.7, 0.0, 0.0, T0=1e-3, points=1)[0]
        G = highq_matrices(cfg, om, Order.FIRST_ORDER, check=False).G
        res += [np.abs(np.abs(G[..., 0, 0]) - 1), np.abs(np.abs(G[..., 1, 1]) - 1)]
        g1, h1 = highq_single_mode(gamma, 0.4 * gamma, om)
        res.append(np.abs(np.abs(g1) ** 2 + h1 ** 2 - 1))
    return _maxf(res), 1e-12


STANDARD_RATES = (1.0, 0.2, 0.9, 0.15)
STANDARD_COUPLING = 1e-4
STANDARD_OMEGA = 0.35
ORDER_BAND = (0.8, 2.2)
CONVERGENCE_QUANTITIES = ("G_diag", "G_offdiag", "Htilde_diag", "Htilde_offdiag", "C_kk", "R_ab")


def _band_violation(order):
    if order is None:
        return math.inf
    lo, hi = ORDER_BAND
    return max(lo - order, order - hi, 0.0)


@invariant("highq: first-order forms converge along T-halving (order in [0.8, 2.2], monotone)", full_only=True)
def _inv_convergence(ctx):
    worst = 0.0
    for ratio in (1.0, 1.3):
        grid = halving_grid(*STANDARD_RATES, STANDARD_COUPLING, T0=1e-2, points=4, T_ratio=ratio)
        rep = limit_report(grid, STANDARD_OMEGA)
        for q in CONVERGENCE_QUANTITIES + ("car_mrr", "herald_mrr", "car_out", "herald_out"):
            worst = max(worst, _band_violation(rep.orders[q]))
            if not rep.monotone[q]:
                worst = math.inf
    return worst, 0.0


@invariant("highq: pole residual |D(-s)|/|D(0)| <= 1e-3 and shrinking", full_only=True)
def _inv_pole_residual(ctx):
    grid = halving_grid(*STANDARD_RATES, STANDARD_COUPLING, T0=1e-2, points=4, T_ratio=1.3)
    res = [max(poles(c).residual_plus, poles(c).residual_minus) for c in grid]
    if any(b > a for a, b in zip(res, res[1:])):
        return math.inf, 1e-3
    return max(res), 1e-3


@invariant("highq: Langevin boundary condition recovered at O(gamma T)", full_only=True)
def _inv_langevin(ctx):
    Ts = [1e-2 / 2 ** k for k in range(4)]
    errs = [langevin_boundary_residual(ModeParams.from_rates(ModeLabel.SIGNAL, T, 1.0, 0.2), STANDARD_OMEGA)
            for T in Ts]
    return _band_violation(fit_order(Ts, errs)), 0.0


@invariant("highq: single-mode and commutator limits converge", full_only=True)
def _inv_single_mode(ctx):
    worst = 0.0
    Ts = [1e-3, 5e-4, 2.5e-4]
    errs = []
    for T in Ts:
        m = ModeParams.from_rates(ModeLabel.SIGNAL, T, 1.0, 0.3)
        exact = classical_lossy_transfer(m.rho, m.alpha, STANDARD_OMEGA * T)
        limit, _ = highq_single_mode(1.0, 0.3, STANDARD_OMEGA)
        errs.append(abs(exact - limit))
    worst = max(worst, _band_violation(fit_order(Ts, errs)))
    gaps, xs = [], [1e-2, 5e-3, 2.5e-3]
    for x in xs:
        cfg = SystemConfig(ModeParams(ModeLabel.SIGNAL, 1.0, 0.9, math.exp(-x / 2)),
                           ModeParams(ModeLabel.IDLER, 1.0, 0.9, math.exp(-x / 2)), PumpConfig())
        gaps.append(abs(commutators_closed_form(cfg).C_aa - highq_commutator_limit(cfg)[0]))
    order = fit_order(xs, gaps)
    worst = max(worst, 0.0 if order is not None and 1.8 <= order <= 2.2 else math.inf)
    return worst, 0.0


# ---------------------------------------------------------------------------
# sweep engine


_SWEEP_TEXT = """\
system.symmetric = true
pump.r = 1e-5
detuning.theta = 0
sweep.quantity = pair_rate_mrr
sweep.axis1.name = alpha
sweep.axis1.values = 0.99, 0.95
sweep.axis2.name = rho
sweep.axis2.min = 0.5
sweep.axis2.max = 1.0
sweep.axis2.count = 11
"""


@invariant("sweep: deterministic bytes and grid-point independence")
def _inv_sweep(ctx):
    from .sweep import _build_system, emit, evaluate_point, grid_points, parse_config, run_sweep

    bundle = parse_config(_SWEEP_TEXT)
    d1, d2 = run_sweep(bundle), run_sweep(bundle)
    if emit(d1, "csv") != emit(d2, "csv") or emit(d1, "json") != emit(d2, "json"):
        return math.inf, 0.0
    worst = 0.0
    for i, (_, p) in enumerate(grid_points(bundle)):
        vals, flag = evaluate_point(_build_system(p), p["theta"] / p["T_a"], "pair_rate_mrr")
        same = np.array_equal(vals, d1.data[i, 2:], equal_nan=True) and flag == d1.flags[i]
        worst = max(worst, 0.0 if same else math.inf)
    return worst, 0.0


# ---------------------------------------------------------------------------


def run(level="fast", seed=SEED, names=None):
    """Run the suite; returns a list of :class:`Result`."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    full = level == "full"
    results = []
    for name, fn, full_only in _REGISTRY:
        if full_only and not full:
            continue
        if names is not None and name not in names:
            continue
        rng = np.random.default_rng(seed)
        ctx = Context(rng, LEVELS[level], full, random_configs(np.random.default_rng(seed), LEVELS[level]))
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                residual, tol = fn(ctx)
            passed = bool(np.isfinite(residual) and residual <= tol)
            err = ""
        except (RingPairError, ArithmeticError, ValueError) as exc:
            residual, tol, passed, err = math.inf, math.nan, False, f"{type(exc).__name__}: {exc}"
        results.append(Result(name, float(residual), float(tol), passed, time.perf_counter() - t0, err))
    return results


def format_report(results):
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{status}  {r.name}: max residual {r.residual:.3e} (tol {r.tolerance:.1e}, {r.seconds:.2f}s)"
        if r.error:
            line += f" [{r.error}]"
        lines.append(line)
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} invariants passed")
    return "\n".join(lines)
