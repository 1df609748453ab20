"""Configuration parsing, parameter sweeps and dataset serialisation.

Config grammar (one entry per line)::

    # comment
    section.key = value      # trailing comments allowed

Keys are case-sensitive.  A repeated key keeps its last value and emits a
:class:`~ringpair.errors.ConfigWarning`.  Every error names the offending
key and, where there is one, its line number.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .commutators import CommutatorSet
from .core import ModeLabel, ModeParams, Process, PumpConfig, SystemConfig, nonlinear_gain
from .errors import ConfigError, ConfigWarning, RingPairError, ValidationError, WeakPumpWarning
from .highq import halving_grid, limit_report, LimitReport
from .observables import observables_from
from .transfer import POLE_TOLERANCE, Location, point_inputs

FORMAT_VERSION = 1

QUANTITIES = ("pair_rate_mrr", "pair_rate_out", "car_mrr", "car_out", "herald_mrr", "herald_out",
              "populations", "transfer_entry", "commutators", "limit_report")
AXIS_NAMES = ("rho", "alpha", "theta", "r", "gamma_T", "gamma_int_T")
SPACINGS = ("linear", "log", "list")
MODE_SECTIONS = ("signal", "idler")

# ---------------------------------------------------------------------------
# value converters


def _float(v):
    try:
        x = float(v)
    except ValueError:
        raise ValueError(f"expected a number, got {v!r}") from None
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {v!r}")
    return x


def _positive(v):
    x = _float(v)
    if not x > 0:
        raise ValueError(f"must be > 0, got {v}")
    return x


def _nonneg(v):
    x = _float(v)
    if x < 0:
        raise ValueError(f"must be >= 0, got {v}")
    return x


def _unit(v):
    x = _float(v)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"must lie in [0, 1], got {v}")
    return x


def _count(v):
    try:
        n = int(v)
    except ValueError:
        raise ValueError(f"expected an integer, got {v!r}") from None
    if n < 2:
        raise ValueError(f"must be >= 2, got {n}")
    return n


def _points(v):
    try:
        n = int(v)
    except ValueError:
        raise ValueError(f"expected an integer, got {v!r}") from None
    if n < 3:
        raise ValueError(f"must be >= 3 (convergence orders need 3 points), got {n}")
    return n


def _bool(v):
    low = v.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {v!r}")


def _choice(options):
    def conv(v):
        if v not in options:
            raise ValueError(f"must be one of {', '.join(options)}; got {v!r}")
        return v
    return conv


def _float_list(v):
    items = [x.strip() for x in v.split(",") if x.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return [_float(x) for x in items]


_MODE_KEYS = {
    "T": _positive, "rho": _unit, "gamma_T": _nonneg, "gamma": _nonneg,
    "alpha": _unit, "gamma_int_T": _nonneg, "gamma_int": _nonneg,
}

KEYS = {
    "system.process": _choice(tuple(p.value for p in Process)),
    "system.symmetric": _bool,
    "pump.r": _nonneg,
    "pump.g": _float,
    "pump.amplitude": _nonneg,
    "pump.phase": _float,
    "pump.rho": _unit,
    "pump.chi": _nonneg,
    "pump.omega_c": _positive,
    "pump.n_bar": _positive,
    "pump.V_ring": _positive,
    "detuning.theta": _float,
    "detuning.omega": _float,
    "sweep.quantity": _choice(QUANTITIES),
    "sweep.location": _choice(tuple(loc.value for loc in Location)),
    "limits.gamma_a": _nonneg,
    "limits.gamma_int_a": _nonneg,
    "limits.gamma_b": _nonneg,
    "limits.gamma_int_b": _nonneg,
    "limits.coupling": _nonneg,
    "limits.T0": _positive,
    "limits.points": _points,
    "limits.T_ratio": _positive,
    "limits.omega": _float,
}
for _sec in MODE_SECTIONS:
    for _k, _conv in _MODE_KEYS.items():
        KEYS[f"{_sec}.{_k}"] = _conv

_AXIS_KEY = re.compile(r"^sweep\.axis([12])\.(name|min|max|count|spacing|values)$")
_AXIS_CONV = {"min": _float, "max": _float, "count": _count, "spacing": _choice(SPACINGS),
              "values": _float_list, "name": str}


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple
    spacing: str = "linear"

    @property
    def base(self):
        return self.name[:-2] if self.name.endswith(("_a", "_b")) else self.name

    @property
    def modes(self):
        if self.name.endswith("_a"):
            return ("signal",)
        if self.name.endswith("_b"):
            return ("idler",)
        return MODE_SECTIONS


@dataclass(frozen=True)
class SweepSpec:
    quantity: str
    axes: tuple
    location: Location | None = None

    def resolved_location(self):
        if self.quantity.endswith("_mrr"):
            return Location.INTRACAVITY
        if self.quantity.endswith("_out"):
            return Location.OUTPUT_BUS
        return self.location or Location.OUTPUT_BUS

    @property
    def n_rows(self):
        return int(np.prod([len(ax.values) for ax in self.axes]))


@dataclass(frozen=True)
class LimitsSpec:
    gamma_a: float
    gamma_int_a: float
    gamma_b: float
    gamma_int_b: float
    coupling: float
    T0: float = 1e-2
    points: int = 4
    T_ratio: float = 1.0
    omega: float = 0.3

    def grid(self):
        return halving_grid(self.gamma_a, self.gamma_int_a, self.gamma_b, self.gamma_int_b, self.coupling,
                            T0=self.T0, points=self.points, T_ratio=self.T_ratio)


@dataclass
class ConfigBundle:
    """Parsed configuration.

    ``params`` holds the fixed physical bindings (``rho_a``, ``alpha_b``,
    ``T_a``, ``g``, ``amplitude``, ``theta`` ...) from which a
    :class:`SystemConfig` is built per grid point.
    """

    values: dict
    lines: dict
    params: dict = field(default_factory=dict)
    sweep: SweepSpec | None = None
    limits: LimitsSpec | None = None

    @property
    def config_hash(self):
        return config_hash(self.values)

    def canonical(self):
        return {k: self.values[k][0] for k in sorted(self.values)}

    def system(self, **overrides) -> SystemConfig:
        """System configuration for the fixed bindings, optionally overriding some."""
        p = dict(self.params)
        p.update(overrides)
        return _build_system(p, self)

    @property
    def omega(self):
        return self.params["theta"] / self.params["T_a"]


def config_hash(values):
    """SHA-256 over the canonical ``key=value`` listing (sorted keys, last value wins)."""
    text = "\n".join(f"{k}={values[k][0]}" for k in sorted(values))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# parsing


def _tokenize(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if "." not in key:
            raise ConfigError(f"key {key!r} must have the form section.key", lineno)
        if not value:
            raise ConfigError(f"{key}: empty value", lineno)
        if key in values:
            warnings.warn(f"line {lineno}: duplicate key {key!r} (first set on line {values[key][1]}); "
                          "the last value wins", ConfigWarning, stacklevel=3)
        values[key] = (value, lineno)
    return values


def _convert(values):
    out = {}
    for key, (value, lineno) in values.items():
        m = _AXIS_KEY.match(key)
        if m:
            conv = _AXIS_CONV[m.group(2)]
        elif key in KEYS:
            conv = KEYS[key]
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            out[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
    return out


def _line(bundle, key):
    return bundle.lines.get(key)


def _exclusive(conv, lines, keys, what):
    present = [k for k in keys if k in conv]
    if len(present) > 1:
        later = max(present, key=lambda k: lines[k])
        raise ConfigError(f"{what}: give only one of {', '.join(present)}", lines[later])
    return present[0] if present else None


def _parse_axes(conv, lines, symmetric):
    axes = []
    for n in ("1", "2"):
        prefix = f"sweep.axis{n}."
        keys = {k[len(prefix):]: k for k in conv if k.startswith(prefix)}
        if not keys:
            continue
        if "name" not in keys:
            raise ConfigError(f"sweep.axis{n}.name is required")
        name = conv[keys["name"]]
        base = name[:-2] if name.endswith(("_a", "_b")) else name
        if base not in AXIS_NAMES or (base != name and base in ("theta", "r")):
            allowed = ", ".join(AXIS_NAMES)
            raise ConfigError(f"sweep.axis{n}.name: unknown axis {name!r} (allowed: {allowed}; rho, alpha, "
                              "gamma_T and gamma_int_T take an optional _a/_b suffix)", lines[keys["name"]])
        if symmetric and base != name:
            raise ConfigError(f"sweep.axis{n}.name: per-mode axis {name!r} conflicts with system.symmetric",
                              lines[keys["name"]])
        spacing = conv.get(keys.get("spacing", ""), "list" if "values" in keys else "linear")
        if spacing == "list":
            if "values" not in keys:
                raise ConfigError(f"sweep.axis{n}.values is required for list spacing")
            for extra in ("min", "max", "count"):
                if extra in keys:
                    raise ConfigError(f"sweep.axis{n}.{extra} is not used with list spacing", lines[keys[extra]])
            vals = tuple(conv[keys["values"]])
            vline = lines[keys["values"]]
            if len(vals) < 2 or len(set(vals)) != len(vals):
                raise ConfigError(f"sweep.axis{n}.values: need at least 2 distinct values", vline)
        else:
            for req in ("min", "max", "count"):
                if req not in keys:
                    raise ConfigError(f"sweep.axis{n}.{req} is required for {spacing} spacing")
            if "values" in keys:
                raise ConfigError(f"sweep.axis{n}.values is only used with list spacing", lines[keys["values"]])
            lo, hi, count = conv[keys["min"]], conv[keys["max"]], conv[keys["count"]]
            vline = lines[keys["max"]]
            if not lo < hi:
                raise ConfigError(f"sweep.axis{n}: min must be < max (got {lo} >= {hi})", vline)
            if spacing == "log":
                if lo <= 0:
                    raise ConfigError(f"sweep.axis{n}.min: log spacing needs min > 0", lines[keys["min"]])
                vals = tuple(float(x) for x in np.geomspace(lo, hi, count))
            else:
                vals = tuple(float(x) for x in np.linspace(lo, hi, count))
        _check_axis_range(base, vals, f"sweep.axis{n}", vline)
        axes.append(Axis(name, vals, spacing))
    if len(axes) == 2 and _axis_targets(axes[0]) & _axis_targets(axes[1]):
        raise ConfigError(f"sweep axes {axes[0].name!r} and {axes[1].name!r} overlap")
    return tuple(axes)


def _check_axis_range(base, vals, where, line):
    for v in vals:
        if base in ("rho", "alpha") and not 0.0 <= v <= 1.0:
            raise ConfigError(f"{where}: {base} values must lie in [0, 1], got {v}", line)
        if base in ("r", "gamma_T", "gamma_int_T") and v < 0:
            raise ConfigError(f"{where}: {base} values must be >= 0, got {v}", line)


_BASE_FIELD = {"rho": "rho", "gamma_T": "rho", "alpha": "alpha", "gamma_int_T": "alpha"}
_SUFFIX = {"signal": "a", "idler": "b"}


def _axis_targets(axis):
    base = axis.base
    if base in ("theta", "r"):
        return {base}
    return {f"{_BASE_FIELD[base]}_{_SUFFIX[m]}" for m in axis.modes}


_FIXED_KEYS_FOR = {
    "rho": ("rho", "gamma_T", "gamma"),
    "alpha": ("alpha", "gamma_int_T", "gamma_int"),
}


def _mode_params(conv, lines, section, swept):
    """Fixed (rho, alpha, T) for one mode; swept fields may be left unset."""
    T = conv.get(f"{section}.T", 1.0)
    out = {"T": T}
    for fld, keys in _FIXED_KEYS_FOR.items():
        full = [f"{section}.{k}" for k in keys]
        key = _exclusive(conv, lines, full, f"{section}.{fld}")
        target = f"{fld}_{_SUFFIX[section]}"
        if target in swept:
            if key is not None:
                raise ConfigError(f"{key} is fixed but {fld} is also swept", lines[key])
            out[fld] = None
            continue
        if key is None:
            raise ConfigError(f"missing required key {section}.{fld} (or {section}.{keys[1]}, {section}.{keys[2]})")
        value = conv[key]
        suffix = key.split(".", 1)[1]
        if suffix in ("gamma_T", "gamma_int_T"):
            value = math.exp(-0.5 * value)
        elif suffix in ("gamma", "gamma_int"):
            value = math.exp(-0.5 * value * T)
        out[fld] = value
    return out


def parse_config(text) -> ConfigBundle:
    """Parse and validate a configuration document."""
    raw = _tokenize(text)
    conv = _convert(raw)
    lines = {k: v[1] for k, v in raw.items()}
    bundle = ConfigBundle(values=raw, lines=lines)
    symmetric = conv.get("system.symmetric", False)
    if symmetric:
        for key in conv:
            if key.startswith("idler."):
                raise ConfigError(f"{key}: idler parameters are copied from signal when system.symmetric = true",
                                  lines[key])

    sweep = None
    if "sweep.quantity" in conv or any(k.startswith("sweep.") for k in conv):
        if "sweep.quantity" not in conv:
            raise ConfigError("missing required key sweep.quantity")
        axes = _parse_axes(conv, lines, symmetric)
        quantity = conv["sweep.quantity"]
        if quantity != "limit_report" and not axes:
            raise ConfigError("a sweep needs at least one axis (sweep.axis1.*)")
        loc = conv.get("sweep.location")
        if loc is not None and quantity.endswith(("_mrr", "_out")):
            raise ConfigError(f"sweep.location conflicts with quantity {quantity!r}", lines["sweep.location"])
        sweep = SweepSpec(quantity, axes, Location(loc) if loc else None)
    bundle.sweep = sweep
    swept = set().union(*(_axis_targets(ax) for ax in sweep.axes)) if sweep else set()

    has_system = any(k.split(".", 1)[0] in ("signal", "idler", "pump", "detuning", "system") for k in conv)
    needs_system = sweep is not None and sweep.quantity != "limit_report"
    if has_system or needs_system:
        bundle.params = _system_params(conv, lines, symmetric, swept)

    if any(k.startswith("limits.") for k in conv) or (sweep is not None and sweep.quantity == "limit_report"):
        bundle.limits = _limits_spec(conv, bundle)
    return bundle


def _system_params(conv, lines, symmetric, swept):
    p = {"process": conv.get("system.process", Process.SPDC.value), "symmetric": symmetric}
    sig = _mode_params(conv, lines, "signal", swept)
    # Symmetric configs copy the signal; symmetric axes then move both modes together.
    idl = dict(sig) if symmetric else _mode_params(conv, lines, "idler", swept)
    p.update(T_a=sig["T"], T_b=idl["T"], rho_a=sig["rho"], rho_b=idl["rho"],
             alpha_a=sig["alpha"], alpha_b=idl["alpha"])

    physical = ("pump.chi", "pump.omega_c", "pump.n_bar", "pump.V_ring")
    given = [k for k in ("pump.r", "pump.g") + physical if k in conv]
    if "pump.r" in conv and len(given) > 1:
        other = [k for k in given if k != "pump.r"]
        raise ConfigError(f"pump.r cannot be combined with {', '.join(other)}", lines["pump.r"])
    if "pump.g" in conv and any(k in conv for k in physical):
        k = next(k for k in physical if k in conv)
        raise ConfigError("pump.g cannot be combined with physical gain inputs", lines[k])
    if "r" in swept:
        for k in given + (["pump.amplitude"] if "pump.amplitude" in conv else []):
            raise ConfigError(f"{k} is fixed but r is also swept", lines[k])
    if "pump.r" in conv:
        if "pump.amplitude" in conv:
            raise ConfigError("pump.amplitude is implied by pump.r", lines["pump.amplitude"])
        p["g"], p["amplitude"] = conv["pump.r"] / p["T_a"], 1.0
    elif any(k in conv for k in physical):
        missing = [k for k in physical if k not in conv]
        if missing:
            raise ConfigError(f"missing required key {missing[0]} for the physical gain")
        p["g"] = nonlinear_gain(p["process"], conv["pump.omega_c"], conv["pump.chi"], conv["pump.n_bar"],
                                conv["pump.V_ring"])
        p["amplitude"] = conv.get("pump.amplitude", 0.0)
    else:
        p["g"] = conv.get("pump.g", 0.0)
        p["amplitude"] = conv.get("pump.amplitude", 1.0 if "pump.g" in conv else 0.0)
    p["theta_p"] = conv.get("pump.phase", 0.0)
    p["rho_c"] = conv.get("pump.rho")

    key = _exclusive(conv, lines, ["detuning.theta", "detuning.omega"], "detuning")
    if "theta" in swept:
        if key is not None:
            raise ConfigError(f"{key} is fixed but theta is also swept", lines[key])
        p["theta"] = None
    elif key == "detuning.omega":
        p["theta"] = conv[key] * p["T_a"]
    else:
        p["theta"] = conv.get("detuning.theta", 0.0)
    return p


def _limits_spec(conv, bundle):
    defaults = {}
    p = bundle.params
    if p and all(p.get(k) is not None for k in ("rho_a", "rho_b", "alpha_a", "alpha_b")):
        try:
            cfg = bundle.system()
        except RingPairError:
            cfg = None
        if cfg is not None:
            defaults = dict(gamma_a=cfg.signal.gamma, gamma_int_a=cfg.signal.gamma_int, gamma_b=cfg.idler.gamma,
                            gamma_int_b=cfg.idler.gamma_int, coupling=abs(cfg.pump.coupling), T0=cfg.signal.T,
                            T_ratio=cfg.idler.T / cfg.signal.T)
    kwargs = {}
    for name in ("gamma_a", "gamma_int_a", "gamma_b", "gamma_int_b", "coupling", "T0", "points", "T_ratio",
                 "omega"):
        key = f"limits.{name}"
        if key in conv:
            kwargs[name] = conv[key]
        elif name in defaults:
            kwargs[name] = defaults[name]
    for req in ("gamma_a", "gamma_int_a", "gamma_b", "gamma_int_b", "coupling"):
        if req not in kwargs:
            raise ConfigError(f"missing required key limits.{req}")
    for name in ("gamma_a", "gamma_int_a", "gamma_b", "gamma_int_b"):
        if not math.isfinite(kwargs[name]):
            raise ConfigError(f"limits.{name} is infinite (rho or alpha = 0)")
    if kwargs["gamma_a"] + kwargs["gamma_int_a"] <= 0 or kwargs["gamma_b"] + kwargs["gamma_int_b"] <= 0:
        line = bundle.lines.get("limits.gamma_a")
        raise ConfigError("limits: total decay rates gamma + gamma_int must be > 0", line)
    return LimitsSpec(**kwargs)


def _build_system(p, bundle=None) -> SystemConfig:
    for k in ("rho_a", "rho_b", "alpha_a", "alpha_b", "theta"):
        if p.get(k) is None:
            raise ValidationError(f"parameter {k} is swept; supply a value for it")
    pump_mode = None
    if p.get("rho_c") is not None:
        pump_mode = ModeParams(ModeLabel.PUMP, p["T_a"], p["rho_c"], 1.0)
    return SystemConfig(
        ModeParams(ModeLabel.SIGNAL, p["T_a"], p["rho_a"], p["alpha_a"]),
        ModeParams(ModeLabel.IDLER, p["T_b"], p["rho_b"], p["alpha_b"]),
        PumpConfig(p["process"], g=float(p["g"]), alpha_p_mag=float(p["amplitude"]), theta_p=float(p["theta_p"])),
        pump_mode,
    )


def load_config(path) -> ConfigBundle:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# sweeps


def _apply_axis(p, axis, value):
    base = axis.base
    if base == "theta":
        p["theta"] = value
    elif base == "r":
        p["g"], p["amplitude"] = value / p["T_a"], 1.0
    else:
        fld = _BASE_FIELD[base]
        v = math.exp(-0.5 * value) if base in ("gamma_T", "gamma_int_T") else value
        for m in axis.modes:
            p[f"{fld}_{_SUFFIX[m]}"] = v


def grid_points(bundle):
    """Yield ``(coordinates, params)`` for every grid point, axis 1 outermost."""
    axes = bundle.sweep.axes
    if len(axes) == 1:
        combos = [(v,) for v in axes[0].values]
    else:
        combos = [(u, v) for u in axes[0].values for v in axes[1].values]
    for coords in combos:
        p = dict(bundle.params)
        for axis, value in zip(axes, coords):
            _apply_axis(p, axis, value)
        yield coords, p


def _columns(quantity):
    if quantity.startswith("pair_rate"):
        return ("psi2_abs2", "pair_rate")
    if quantity.startswith("car"):
        return ("car",)
    if quantity.startswith("herald"):
        return ("herald",)
    if quantity == "populations":
        return ("p0", "p1a", "p1b", "p2")
    if quantity == "transfer_entry":
        names = []
        for mat in ("G", "H"):
            for e in ("aa", "ab", "ba", "bb"):
                names += [f"{mat}_{e}_re", f"{mat}_{e}_im"]
        return tuple(names) + ("D_re", "D_im")
    if quantity == "commutators":
        return ("C_aa", "C_bb", "C_ab_re", "C_ab_im", "D_ab_re", "D_ab_im")
    raise ValidationError(f"quantity {quantity!r} is not a grid quantity")


class _Pair:
    """Unvalidated transfer pair (poles are flagged by the caller, not raised)."""

    def __init__(self, G, H, D, location):
        self.G, self.H, self.D, self.location = G, H, D, location


def evaluate(configs, omegas, quantity, location):
    """Evaluate ``quantity`` for parallel lists of configs and detunings.

    Returns ``(values[n, ncol], flags[n])``.  Rows at poles or where the
    intracavity field is undefined are NaN and flagged.  This is the single
    code path used by sweeps and by standalone point evaluation, so results
    agree bit for bit.
    """
    location = Location(location)
    cols = _columns(quantity)
    n = len(configs)
    if quantity == "commutators":
        vals = np.empty((n, len(cols)))
        for i, cfg in enumerate(configs):
            c_aa = 1.0 - cfg.signal.alpha ** 2 - abs(cfg.r_a) ** 2
            c_bb = 1.0 - cfg.idler.alpha ** 2 - abs(cfg.r_b) ** 2
            d_ab = 1j * (cfg.r_b.conjugate() - cfg.r_a)
            vals[i] = (c_aa, c_bb, 0.0, 0.0, d_ab.real, d_ab.imag)
        return vals, ["ok"] * n
    inputs = [point_inputs(cfg, om) for cfg, om in zip(configs, omegas)]
    stacked = [np.array([inp[k] for inp in inputs], dtype=complex if k >= 8 else float) for k in range(10)]
    raw = _kernels.transfer(*stacked)
    k0 = 0 if location is Location.OUTPUT_BUS else 8
    G = raw[:, k0:k0 + 4].reshape(n, 2, 2)
    H = raw[:, k0 + 4:k0 + 8].reshape(n, 2, 2)
    D = raw[:, 16]
    flags = np.array(["ok"] * n, dtype=object)
    flags[~(np.abs(D) > POLE_TOLERANCE)] = "pole"
    if location is Location.INTRACAVITY:
        flags[(stacked[4] == 0) | (stacked[5] == 0)] = "undefined"
    if quantity == "transfer_entry":
        vals = np.empty((n, len(cols)))
        for m, mat in enumerate((G, H)):
            flat = mat.reshape(n, 4)
            vals[:, 8 * m:8 * m + 8:2] = flat.real
            vals[:, 8 * m + 1:8 * m + 8:2] = flat.imag
        vals[:, 16], vals[:, 17] = D.real, D.imag
    else:
        c_aa = np.array([1.0 - cfg.signal.alpha ** 2 - abs(cfg.r_a) ** 2 for cfg in configs])
        c_bb = np.array([1.0 - cfg.idler.alpha ** 2 - abs(cfg.r_b) ** 2 for cfg in configs])
        comms = CommutatorSet(c_aa, c_bb, np.zeros(n), np.zeros(n, dtype=complex))
        theta_p = np.array([cfg.pump.phase for cfg in configs])
        r_ab2 = np.array([cfg.r_ab ** 2 for cfg in configs])
        with np.errstate(all="ignore"):
            rec = observables_from(_Pair(G, H, D, location), comms, theta_p, r_ab2, np.asarray(omegas, dtype=float))
        vals = np.stack([np.asarray(getattr(rec, c), dtype=float) for c in cols], axis=-1)
    bad = flags != "ok"
    vals[bad] = np.nan
    return vals, list(flags)


def evaluate_point(config, omega, quantity, location=None):
    """Standalone evaluation of one grid point; identical to the sweep value."""
    if location is None:
        location = SweepSpec(quantity, ()).resolved_location()
    vals, flags = evaluate([config], [omega], quantity, location)
    return vals[0], flags[0]


@dataclass
class Dataset:
    columns: list
    data: np.ndarray
    flags: list
    config: dict = field(default_factory=dict)
    config_hash: str = ""
    quantity: str = ""
    location: str = ""
    version: int = FORMAT_VERSION

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (list(self.columns) == list(other.columns) and list(self.flags) == list(other.flags)
                and self.config == other.config and self.config_hash == other.config_hash
                and self.quantity == other.quantity and self.location == other.location
                and self.version == other.version
                and self.data.shape == other.data.shape
                and bool(np.array_equal(self.data, other.data, equal_nan=True)))

    def column(self, name):
        return self.data[:, self.columns.index(name)]


def run_sweep(bundle: ConfigBundle) -> Dataset:
    """Evaluate the configured sweep.  Rows are ordered by grid index (axis 1 outermost)."""
    spec = bundle.sweep
    if spec is None:
        raise ValidationError("the configuration has no sweep section")
    if spec.quantity == "limit_report":
        return limits_dataset(bundle)
    location = spec.resolved_location()
    coords, configs, omegas = [], [], []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", WeakPumpWarning)
        for c, p in grid_points(bundle):
            cfg = _build_system(p)
            coords.append(c)
            configs.append(cfg)
            omegas.append(p["theta"] / p["T_a"])
    if caught:
        warnings.warn(f"{len(caught)} grid point(s) exceed the weak-pump threshold", WeakPumpWarning, stacklevel=2)
    vals, flags = evaluate(configs, omegas, spec.quantity, location)
    axis_cols = [ax.name for ax in spec.axes]
    data = np.hstack([np.asarray(coords, dtype=float), vals])
    return Dataset(axis_cols + list(_columns(spec.quantity)), data, flags, bundle.canonical(), bundle.config_hash,
                   spec.quantity, location.value)


def run_limits(bundle: ConfigBundle) -> LimitReport:
    if bundle.limits is None:
        raise ValidationError("the configuration has no limits section (limits.* keys or a system to derive them)")
    spec = bundle.limits
    return limit_report(spec.grid(), omega=spec.omega)


def limits_dataset(bundle: ConfigBundle, report: LimitReport | None = None) -> Dataset:
    """Limit report as a dataset: one row per grid point, then one ``fitted_order`` row."""
    report = report or run_limits(bundle)
    qs = list(LimitReport.QUANTITIES)
    spec = bundle.limits
    rows, flags = [], []
    for i, T in enumerate(report.T):
        rows.append([T, spec.T_ratio * T] + [report.errors[q][i] for q in qs])
        flags.append("ok")
    orders = [report.orders[q] for q in qs]
    rows.append([np.nan, np.nan] + [np.nan if o is None else o for o in orders])
    flags.append("fitted_order")
    return Dataset(["T_a", "T_b"] + [f"err_{q}" for q in qs], np.array(rows, dtype=float), flags,
                   bundle.canonical(), bundle.config_hash, "limit_report", "")


# ---------------------------------------------------------------------------
# serialisation


def _fmt(x):
    return "%.17g" % x


def emit(dataset: Dataset, fmt="csv") -> bytes:
    """Serialise a dataset as CSV or JSON bytes (UTF-8, LF line endings)."""
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# config-hash: {dataset.config_hash}\n")
        buf.write(",".join(list(dataset.columns) + ["flag"]) + "\n")
        for row, flag in zip(dataset.data, dataset.flags):
            buf.write(",".join([_fmt(x) for x in row] + [flag]) + "\n")
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        doc = {
            "version": dataset.version,
            "config_hash": dataset.config_hash,
            "config": dataset.config,
            "quantity": dataset.quantity,
            "location": dataset.location,
            "columns": list(dataset.columns),
            "rows": [[_json_num(x) for x in row] for row in dataset.data],
            "flags": list(dataset.flags),
        }
        return (json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n").encode("utf-8")
    raise ValidationError(f"unknown output format {fmt!r} (csv or json)")


def _json_num(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _from_json_num(x):
    return float(x)


def from_json(data) -> Dataset:
    doc = json.loads(data)
    rows = np.array([[_from_json_num(x) for x in row] for row in doc["rows"]], dtype=float)
    rows = rows.reshape(len(doc["rows"]), len(doc["columns"]))
    return Dataset(doc["columns"], rows, doc["flags"], doc["config"], doc["config_hash"], doc["quantity"],
                   doc["location"], doc["version"])


def read_csv(data) -> Dataset:
    """Parse emitted CSV back into a dataset (the config echo is not stored in CSV)."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.split("\n")
    if not lines[0].startswith("# config-hash: "):
        raise ValidationError("CSV does not start with a config-hash line")
    digest = lines[0][len("# config-hash: "):]
    header = lines[1].split(",")
    if header[-1] != "flag":
        raise ValidationError("CSV header must end with the flag column")
    rows, flags = [], []
    for line in lines[2:]:
        if not line:
            continue
        parts = line.split(",")
        rows.append([float(x) for x in parts[:-1]])
        flags.append(parts[-1])
    data_ = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    return Dataset(header[:-1], data_, flags, {}, digest)
