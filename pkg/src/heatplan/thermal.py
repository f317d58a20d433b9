"""Forward evaluation of the R6C2 grey-box thermal network.

Two differential states (indoor air ``T_i`` and wall core ``T_m``) plus two
algebraic surface nodes (``T_h`` outdoor, ``T_s`` indoor) driven by weather,
occupancy/ventilation schedules, and a set-point tracking thermostat whose
output power is clamped to the plant limits. Integration is classical
fixed-step RK4 with the clamped power and all sources held constant over a
grid step; the algebraic nodes are re-solved at every internal stage.

All internal math helpers accept either scalars or equally shaped numpy
arrays, so a population of parameter vectors can be simulated in lockstep
with bit-identical results to the one-at-a-time path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, time

import numpy as np

from .errors import ConfigurationError, NumericalBlowupError
from .timeseries import GRID_STEP, InputBundle, TimeSeries, Unit

PARAMETER_FIELDS = ("r_i", "r_m", "r_s", "r_f", "r_v", "r_e", "c_i", "c_m", "g", "alpha", "a")


@dataclass(frozen=True)
class RcParameters:
    """The 11 calibratable parameters of the thermal network.

    Resistances in K/W, capacitances in J/K, ``g`` the maximum occupancy heat
    gain in W, ``alpha`` the fitted solar gain multiplier, and ``a`` the
    radiative fraction of internal gains.
    """

    r_i: float
    r_m: float
    r_s: float
    r_f: float
    r_v: float
    r_e: float
    c_i: float
    c_m: float
    g: float
    alpha: float
    a: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError("parameters must be finite")
        for name in ("r_i", "r_m", "r_s", "r_f", "r_v", "r_e", "c_i", "c_m"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.g < 0.0:
            raise ValueError("g must be non-negative")
        if self.alpha < 0.0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 <= self.a <= 1.0:
            raise ValueError("a must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in PARAMETER_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values) -> "RcParameters":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(PARAMETER_FIELDS),):
            raise ValueError(f"expected {len(PARAMETER_FIELDS)} parameter values")
        return cls(**{f: float(v) for f, v in zip(PARAMETER_FIELDS, values)})


@dataclass(frozen=True)
class ParameterBounds:
    """Componentwise box for :class:`RcParameters`."""

    lower: RcParameters
    upper: RcParameters

    def __post_init__(self):
        lo, hi = self.lower.as_array(), self.upper.as_array()
        if np.any(lo > hi):
            bad = [PARAMETER_FIELDS[i] for i in np.nonzero(lo > hi)[0]]
            raise ConfigurationError(f"lower bound exceeds upper bound for: {', '.join(bad)}")

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower.as_array(), self.upper.as_array()

    def contains(self, params: RcParameters) -> bool:
        lo, hi = self.arrays()
        v = params.as_array()
        return bool(np.all(v >= lo) and np.all(v <= hi))


def default_bounds() -> ParameterBounds:
    """Generous physical envelopes suitable as a calibration starting point."""
    lower = RcParameters(
        r_i=1e-6, r_m=1e-6, r_s=1e-6, r_f=1e-6, r_v=1e-6, r_e=1e-6,
        c_i=1e4, c_m=1e4, g=0.0, alpha=0.0, a=0.0,
    )
    upper = RcParameters(
        r_i=1.0, r_m=1.0, r_s=1.0, r_f=1.0, r_v=1.0, r_e=1.0,
        c_i=1e10, c_m=1e10, g=1e5, alpha=100.0, a=1.0,
    )
    return ParameterBounds(lower, upper)


@dataclass(frozen=True)
class BuildingConfig:
    """Static plant and regulation settings (powers in W, signed)."""

    p_min: float
    p_max: float
    mode: str
    day_setpoint: float
    night_setpoint: float
    day_start: time
    day_end: time
    volume: float | None = None
    machine_efficiency: float | None = None
    lhv: float | None = None
    substeps: int = 1

    def __post_init__(self):
        if self.mode not in ("heating", "cooling"):
            raise ConfigurationError(f"mode must be 'heating' or 'cooling', got {self.mode!r}")
        if self.p_min > self.p_max:
            raise ConfigurationError("p_min must not exceed p_max")
        if self.mode == "heating" and self.p_min < 0.0:
            raise ConfigurationError("heating mode requires p_min >= 0")
        if self.mode == "cooling" and self.p_max > 0.0:
            raise ConfigurationError("cooling mode requires p_max <= 0")
        if not self.day_start < self.day_end:
            raise ConfigurationError("day_start must precede day_end")
        if self.machine_efficiency is not None and not 0.0 <= self.machine_efficiency <= 1.0:
            raise ConfigurationError("machine_efficiency must lie in [0, 1]")
        if self.substeps < 1:
            raise ConfigurationError("substeps must be >= 1")


@dataclass(frozen=True)
class ThermalState:
    """Differential states: indoor air and wall core temperature (degC)."""

    t_i: float
    t_m: float

    def __post_init__(self):
        if not (np.isfinite(self.t_i) and np.isfinite(self.t_m)):
            raise ValueError("state temperatures must be finite")


@dataclass(frozen=True)
class StepInputs:
    """Exogenous drive at one grid instant."""

    t_e: float
    phi_ext: float
    occ: float
    ven: float
    phi_int: float = 0.0  # hook for indoor solar flux, zero by default


@dataclass(frozen=True)
class SimulationResult:
    power: TimeSeries
    indoor_temp: TimeSeries
    state_trace: tuple[ThermalState, ...]
    outdoor_surface_temp: TimeSeries
    indoor_surface_temp: TimeSeries
    setpoints: TimeSeries


def _clock_minutes(t: datetime) -> float:
    return t.hour * 60.0 + t.minute + t.second / 60.0


def snap_to_grid(minutes: float) -> float:
    """Floor a continuous minutes-since-midnight value to the 15-minute grid."""
    return float(np.floor(minutes / 15.0) * 15.0)


def setpoint_at(config: BuildingConfig, t: datetime, override=None) -> float:
    """Set-point at instant ``t``: day value inside the half-open day window,
    night value otherwise. ``override`` may carry ``day_initial_time`` /
    ``night_initial_time`` (minutes since midnight, snapped down to the grid)
    and ``night_setpoint``; missing pieces fall back to the config."""
    if override is None:
        clock = t.time()
        if config.day_start <= clock < config.day_end:
            return config.day_setpoint
        return config.night_setpoint
    m = _clock_minutes(t)
    day_from = snap_to_grid(override.day_initial_time)
    day_until = snap_to_grid(override.night_initial_time)
    if day_from <= m < day_until:
        return config.day_setpoint
    night = getattr(override, "night_setpoint", None)
    return config.night_setpoint if night is None else night


# -- elementwise network math (floats or numpy arrays) ------------------------

def _unpack(params: RcParameters):
    return (params.r_i, params.r_m, params.r_s, params.r_f, params.r_v,
            params.r_e, params.c_i, params.c_m, params.g, params.alpha, params.a)


def _node_temps(p, t_i, t_m, t_e, phi_ext, occ, phi_int):
    r_i, r_m, r_s, _r_f, _r_v, r_e, _c_i, _c_m, g, alpha, a = p
    t_h = (t_m / r_m + t_e / r_e + alpha * phi_ext) / (1.0 / r_m + 1.0 / r_e)
    t_s = (t_i / r_i + t_m / r_s + a * g * occ + phi_int) / (1.0 / r_i + 1.0 / r_s)
    return t_h, t_s


def _demand(p, t_i, t_s, t_e, occ, ven, setpoint, dt):
    r_i, _r_m, _r_s, r_f, r_v, _r_e, c_i, _c_m, g, _alpha, a = p
    return (
        c_i * (setpoint - t_i) / dt
        + (t_i - t_s) / r_i
        + (t_i - t_e) / r_f
        + ven * (t_i - t_e) / r_v
        - (1.0 - a) * g * occ
    )


def _derivatives(p, t_i, t_m, t_e, phi_ext, occ, ven, phi_int, power):
    r_i, r_m, r_s, r_f, r_v, _r_e, c_i, c_m, g, _alpha, a = p
    t_h, t_s = _node_temps(p, t_i, t_m, t_e, phi_ext, occ, phi_int)
    d_ti = (
        (t_s - t_i) / r_i
        + ven * (t_e - t_i) / r_v
        + (t_e - t_i) / r_f
        + (1.0 - a) * g * occ
        + power
    ) / c_i
    d_tm = ((t_h - t_m) / r_m + (t_s - t_m) / r_s) / c_m
    return d_ti, d_tm


def _advance(p, t_i, t_m, t_e, phi_ext, occ, ven, phi_int, power, dt, substeps):
    h = dt / substeps
    for _ in range(substeps):
        k1i, k1m = _derivatives(p, t_i, t_m, t_e, phi_ext, occ, ven, phi_int, power)
        k2i, k2m = _derivatives(p, t_i + 0.5 * h * k1i, t_m + 0.5 * h * k1m,
                                t_e, phi_ext, occ, ven, phi_int, power)
        k3i, k3m = _derivatives(p, t_i + 0.5 * h * k2i, t_m + 0.5 * h * k2m,
                                t_e, phi_ext, occ, ven, phi_int, power)
        k4i, k4m = _derivatives(p, t_i + h * k3i, t_m + h * k3m,
                                t_e, phi_ext, occ, ven, phi_int, power)
        t_i = t_i + (h / 6.0) * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
        t_m = t_m + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
    return t_i, t_m


def _clamp(x, lo, hi):
    if isinstance(x, np.ndarray):
        return np.minimum(np.maximum(x, lo), hi)
    return min(max(x, lo), hi)


# -- public operations ---------------------------------------------------------

def algebraic_nodes(params: RcParameters, state: ThermalState, t_e: float,
                    phi_ext: float, occ: float, phi_int: float = 0.0
                    ) -> tuple[float, float]:
    """Solve the two algebraic surface nodes for the given state and drive."""
    return _node_temps(_unpack(params), state.t_i, state.t_m, t_e, phi_ext, occ, phi_int)


def thermostat_power(params: RcParameters, config: BuildingConfig, state: ThermalState,
                     inputs: StepInputs, setpoint: float, dt: float
                     ) -> tuple[float, float]:
    """Unclamped demand that would close the set-point gap over ``dt`` seconds,
    and the same demand clamped to the plant limits."""
    if dt <= 0.0:
        raise ConfigurationError("dt must be positive")
    p = _unpack(params)
    _t_h, t_s = _node_temps(p, state.t_i, state.t_m, inputs.t_e, inputs.phi_ext,
                            inputs.occ, inputs.phi_int)
    demand = _demand(p, state.t_i, t_s, inputs.t_e, inputs.occ, inputs.ven, setpoint, dt)
    return demand, _clamp(demand, config.p_min, config.p_max)


def step(params: RcParameters, config: BuildingConfig, state: ThermalState,
         inputs: StepInputs, setpoint: float, dt: float, substeps: int | None = None
         ) -> tuple[ThermalState, float]:
    """Advance one grid step of ``dt`` seconds; returns the next state and the
    clamped power applied over the step."""
    _demand_w, power = thermostat_power(params, config, state, inputs, setpoint, dt)
    n_sub = config.substeps if substeps is None else substeps
    t_i, t_m = _advance(_unpack(params), state.t_i, state.t_m, inputs.t_e,
                        inputs.phi_ext, inputs.occ, inputs.ven, inputs.phi_int,
                        power, dt, n_sub)
    if not (np.isfinite(t_i) and np.isfinite(t_m)):
        raise NumericalBlowupError(f"non-finite state after step with params {params}")
    return ThermalState(float(t_i), float(t_m)), power


def initial_state_from_history(bundle: InputBundle) -> ThermalState:
    """Seed state from the first measured instants: indoor temperature as-is,
    wall core at the indoor/external mean."""
    bundle.require("indoor_temp", "external_temp")
    t_i = float(bundle.indoor_temp.values[0])
    t_e = float(bundle.external_temp.values[0])
    return ThermalState(t_i, 0.5 * (t_i + t_e))


def simulate(params: RcParameters, config: BuildingConfig, bundle: InputBundle,
             initial: ThermalState, setpoint_override=None) -> SimulationResult:
    """Run the network over an aligned bundle.

    Series sample i is the state (and freshly solved surface nodes) at grid
    instant i; power sample i is the clamped power held over step i. The run
    is deterministic: identical inputs give bit-identical outputs.
    """
    bundle.require("external_temp", "solar_irradiance", "occupancy", "ventilation")
    if not bundle.aligned:
        raise ConfigurationError("bundle must be aligned before simulation")
    n = len(bundle)
    origin = bundle.origin
    step_delta = bundle.step
    dt = step_delta.total_seconds()
    p = _unpack(params)
    substeps = config.substeps
    p_min, p_max = config.p_min, config.p_max

    te = bundle.external_temp.values
    phi = bundle.solar_irradiance.values
    occ = bundle.occupancy.values
    ven = bundle.ventilation.values

    t_i, t_m = float(initial.t_i), float(initial.t_m)
    out_p = np.empty(n)
    out_ti = np.empty(n)
    out_tm = np.empty(n)
    out_th = np.empty(n)
    out_ts = np.empty(n)
    out_sp = np.empty(n)

    t = origin
    for i in range(n):
        sp = setpoint_at(config, t, setpoint_override)
        t_e_i, phi_i, occ_i, ven_i = te[i], phi[i], occ[i], ven[i]
        t_h, t_s = _node_temps(p, t_i, t_m, t_e_i, phi_i, occ_i, 0.0)
        demand = _demand(p, t_i, t_s, t_e_i, occ_i, ven_i, sp, dt)
        power = min(max(demand, p_min), p_max)
        out_ti[i] = t_i
        out_tm[i] = t_m
        out_th[i] = t_h
        out_ts[i] = t_s
        out_sp[i] = sp
        out_p[i] = power
        t_i, t_m = _advance(p, t_i, t_m, t_e_i, phi_i, occ_i, ven_i, 0.0,
                            power, dt, substeps)
        if not (np.isfinite(t_i) and np.isfinite(t_m)):
            raise NumericalBlowupError(
                f"non-finite state at step {i} (instant {t.isoformat()}) with params {params}"
            )
        t += step_delta

    trace = tuple(ThermalState(float(a), float(b)) for a, b in zip(out_ti, out_tm))
    return SimulationResult(
        power=TimeSeries(origin, step_delta, out_p, Unit.WATT),
        indoor_temp=TimeSeries(origin, step_delta, out_ti, Unit.CELSIUS),
        state_trace=trace,
        outdoor_surface_temp=TimeSeries(origin, step_delta, out_th, Unit.CELSIUS),
        indoor_surface_temp=TimeSeries(origin, step_delta, out_ts, Unit.CELSIUS),
        setpoints=TimeSeries(origin, step_delta, out_sp, Unit.CELSIUS),
    )


def simulate_batch(param_matrix: np.ndarray, config: BuildingConfig, bundle: InputBundle,
                   initial: ThermalState, setpoint_override=None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Simulate many parameter vectors in lockstep.

    ``param_matrix`` has one row per candidate in :data:`PARAMETER_FIELDS`
    order. Returns ``(power, indoor_temp)`` arrays of shape (m, n). Rows whose
    trajectory leaves the finite range carry NaNs from that step on instead of
    raising. The arithmetic matches :func:`simulate` operation for operation,
    so healthy rows are bit-identical to the scalar path.
    """
    bundle.require("external_temp", "solar_irradiance", "occupancy", "ventilation")
    if not bundle.aligned:
        raise ConfigurationError("bundle must be aligned before simulation")
    mat = np.asarray(param_matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[1] != len(PARAMETER_FIELDS):
        raise ConfigurationError("param_matrix must be (m, 11)")
    m = mat.shape[0]
    n = len(bundle)
    origin = bundle.origin
    step_delta = bundle.step
    dt = step_delta.total_seconds()
    p = tuple(np.ascontiguousarray(mat[:, j]) for j in range(mat.shape[1]))

    te = bundle.external_temp.values
    phi = bundle.solar_irradiance.values
    occ = bundle.occupancy.values
    ven = bundle.ventilation.values

    t_i = np.full(m, float(initial.t_i))
    t_m = np.full(m, float(initial.t_m))
    out_p = np.empty((m, n))
    out_ti = np.empty((m, n))

    t = origin
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for i in range(n):
            sp = setpoint_at(config, t, setpoint_override)
            t_e_i, phi_i, occ_i, ven_i = te[i], phi[i], occ[i], ven[i]
            _t_h, t_s = _node_temps(p, t_i, t_m, t_e_i, phi_i, occ_i, 0.0)
            demand = _demand(p, t_i, t_s, t_e_i, occ_i, ven_i, sp, dt)
            power = np.minimum(np.maximum(demand, config.p_min), config.p_max)
            out_ti[:, i] = t_i
            out_p[:, i] = power
            t_i, t_m = _advance(p, t_i, t_m, t_e_i, phi_i, occ_i, ven_i, 0.0,
                                power, dt, config.substeps)
            t += step_delta
    return out_p, out_ti
