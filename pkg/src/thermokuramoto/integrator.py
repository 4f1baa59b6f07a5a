"""
Time stepping for the TK, Kuramoto and TCS vector fields.

Two schemes are available: classical fixed-step RK4 and the Dormand-Prince
5(4) embedded pair with local error control. Temperatures are never clipped:
a step that would push any temperature below ``positivity_floor`` is
rejected and retried at half the step (adaptive) or aborts the run (fixed),
since the exact flow keeps every temperature inside its initial range.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Callable, Dict, Iterator, Optional, Tuple, Union

import numpy as np

from .errors import DomainError, IntegrationError
from .model import (
    EnsembleState,
    FloatArray,
    ModelParams,
    Observables,
    coupling_sums,
    conserved_functional,
    diameter,
    order_parameter,
    temperature_rates,
)
from .tcs import TcsState, tcs_derivatives

logger = logging.getLogger(__name__)

Rhs = Callable[[float, FloatArray], FloatArray]
InitialState = Union[EnsembleState, TcsState, FloatArray]

METHODS = ("rk4_fixed", "rk45_adaptive")


@dataclass(frozen=True)
class IntegratorOptions:
    """Stepping controls.

    Samples are stored on a uniform grid of spacing ``sample_interval``
    (default ``dt * output_stride``) plus the final time ``t_end``. For the
    fixed scheme the grid must be a whole number of steps, which the default
    guarantees.
    """

    method: str = "rk45_adaptive"
    dt: float = 1e-2
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    t_end: float = 10.0
    output_stride: int = 10
    positivity_floor: float = 1e-12
    sample_interval: Optional[float] = None
    max_steps: int = 5_000_000

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if not self.t_end > 0:
            raise DomainError(f"t_end must be positive, got {self.t_end}")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise DomainError(f"output_stride must be a positive integer, got {self.output_stride}")
        if not self.positivity_floor > 0:
            raise DomainError("positivity_floor must be positive")
        if self.sample_interval is not None and not self.sample_interval > 0:
            raise DomainError("sample_interval must be positive")

    @property
    def sample_dt(self) -> float:
        return self.sample_interval if self.sample_interval is not None else self.dt * self.output_stride

    def replace(self, **changes: Any) -> "IntegratorOptions":
        return replace(self, **changes)


def default_dt(params: ModelParams, temps: FloatArray) -> float:
    """Fraction of the fastest local relaxation time, 0.01·min(T/(κ₁ψ_max), T²/(κ₂ζ_max))."""
    t_min = float(np.min(temps))
    scales = [t_min / (params.kappa1 * params.psi_max)] if params.psi_max > 0 else []
    if params.kappa2 > 0 and params.zeta_max > 0:
        scales.append(t_min ** 2 / (params.kappa2 * params.zeta_max))
    return 0.01 * min(scales) if scales else 0.01


# -- vector fields on packed state vectors -------------------------------------


def tk_field(params: ModelParams) -> Rhs:
    n = params.n_oscillators
    k = params.kappa1 / n
    nu, psi = params.nat_freq, params.psi

    def f(t: float, y: FloatArray) -> FloatArray:
        theta, temps = y[:n], y[n:]
        out = np.empty_like(y)
        out[:n] = nu + k * coupling_sums(theta, psi) / temps
        out[n:] = temperature_rates(temps, params)
        return out

    return f


def kuramoto_field(params: ModelParams, t_infinity: float) -> Rhs:
    if not t_infinity > 0:
        raise DomainError(f"t_infinity must be positive, got {t_infinity}")
    k = params.kappa1 / params.n_oscillators
    nu, psi = params.nat_freq, params.psi

    def f(t: float, y: FloatArray) -> FloatArray:
        return nu + k * coupling_sums(y, psi) / t_infinity

    return f


def tcs_field(params: ModelParams) -> Rhs:
    n = params.n_oscillators

    def f(t: float, y: FloatArray) -> FloatArray:
        v = y[2 * n:4 * n].reshape(n, 2)
        temps = y[4 * n:]
        d = tcs_derivatives(v, temps, params)
        return np.concatenate([d.dx.ravel(), d.dv.ravel(), d.dtemps])

    return f


def _pack(state: InitialState) -> Tuple[str, int, float, FloatArray]:
    if isinstance(state, EnsembleState):
        return "tk", state.n, state.time, np.concatenate([state.phases, state.temps])
    if isinstance(state, TcsState):
        y = np.concatenate([state.positions.ravel(), state.velocities.ravel(), state.temps])
        return "tcs", state.n, state.time, y
    phases = np.array(state, dtype=np.float64).ravel()
    if not np.all(np.isfinite(phases)):
        raise DomainError("initial phases must be finite")
    return "kuramoto", phases.size, 0.0, phases


def _temp_slice(kind: str, n: int) -> Optional[slice]:
    if kind == "tk":
        return slice(n, 2 * n)
    if kind == "tcs":
        return slice(4 * n, 5 * n)
    return None


# -- trajectory -----------------------------------------------------------------


@dataclass(eq=False)
class Trajectory:
    """Sampled solution. ``values`` holds one packed state vector per row."""

    kind: str
    n: int
    times: FloatArray
    values: FloatArray
    params: Optional[ModelParams] = None
    options: Optional[IntegratorOptions] = None
    t_infinity: Optional[float] = None
    stats: Dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def phases(self) -> FloatArray:
        if self.kind == "tcs":
            raise AttributeError("TCS trajectories carry headings via ansatz_project, not phases")
        return self.values[:, : self.n]

    @property
    def temps(self) -> FloatArray:
        if self.kind == "tk":
            return self.values[:, self.n : 2 * self.n]
        if self.kind == "tcs":
            return self.values[:, 4 * self.n :]
        if self.t_infinity is None:
            raise AttributeError("Kuramoto trajectory has no t_infinity recorded")
        return np.full((len(self), self.n), self.t_infinity)

    @property
    def positions(self) -> FloatArray:
        return self.values[:, : 2 * self.n].reshape(-1, self.n, 2)

    @property
    def velocities(self) -> FloatArray:
        return self.values[:, 2 * self.n : 4 * self.n].reshape(-1, self.n, 2)

    def state(self, k: int) -> InitialState:
        t, y = float(self.times[k]), self.values[k]
        n = self.n
        if self.kind == "tk":
            return EnsembleState(t, y[:n], y[n:])
        if self.kind == "tcs":
            return TcsState(t, y[: 2 * n], y[2 * n : 4 * n], y[4 * n :])
        return y.copy()

    @cached_property
    def observables(self) -> Dict[str, FloatArray]:
        """Observable time series, one array per field of :class:`Observables`."""
        if self.kind == "tcs":
            raise AttributeError("observables are defined for phase trajectories")
        phases, temps = self.phases, self.temps
        eta = self.params.eta if self.params is not None else 0.0
        t_star = self.params.t_star if self.params is not None else 1.0
        return {
            "entropy": np.sum(np.log(temps), axis=1),
            "phase_diameter": diameter(phases),
            "temp_diameter": diameter(temps),
            "order_parameter": order_parameter(phases),
            "conserved_g": conserved_functional(temps, eta, t_star),
            "phase_sum": np.sum(phases, axis=1),
            "avg_phase": np.mean(phases, axis=1),
        }

    def samples(self) -> Iterator[Tuple[float, InitialState, Observables]]:
        obs = self.observables
        for k in range(len(self)):
            yield (
                float(self.times[k]),
                self.state(k),
                Observables(**{name: float(col[k]) for name, col in obs.items()}),
            )


# -- steppers ---------------------------------------------------------------------


def _sample_grid(t0: float, t_end: float, spacing: float) -> FloatArray:
    m = int(math.ceil((t_end - t0) / spacing - 1e-9))
    grid = t0 + spacing * np.arange(m + 1, dtype=np.float64)
    grid[-1] = t_end
    return grid


def _positivity_ok(y: FloatArray, temps: Optional[slice], floor: float) -> bool:
    if not np.all(np.isfinite(y)):
        return False
    return temps is None or bool(np.min(y[temps]) >= floor)


def _rk4(rhs: Rhs, t0: float, y0: FloatArray, opts: IntegratorOptions, temps: Optional[slice], unpack):
    t_end, dt = opts.t_end, opts.dt
    n_steps = int(math.ceil((t_end - t0) / dt - 1e-9))
    times, values = [t0], [y0.copy()]
    y, t = y0.copy(), t0
    for i in range(1, n_steps + 1):
        t_next = t_end if i == n_steps else t0 + i * dt
        h = t_next - t
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not _positivity_ok(y_new, temps, opts.positivity_floor):
            lowest = float(np.min(y_new[temps])) if temps is not None else float("nan")
            raise IntegrationError(
                f"fixed step dt={dt:g} left the admissible region (min temperature {lowest:.3e}, "
                f"floor {opts.positivity_floor:g}); reduce dt or use rk45_adaptive",
                t,
                unpack(t, y),
            )
        y, t = y_new, t_next
        if i % opts.output_stride == 0 or i == n_steps:
            times.append(t)
            values.append(y.copy())
    return np.asarray(times), np.asarray(values), {"steps": n_steps, "rejected": 0, "evals": 4 * n_steps}


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def _dopri(rhs: Rhs, t0: float, y0: FloatArray, opts: IntegratorOptions, temps: Optional[slice], unpack):
    grid = _sample_grid(t0, opts.t_end, opts.sample_dt)
    times, values = [t0], [y0.copy()]
    rtol, atol = opts.rel_tol, opts.abs_tol
    t, y = t0, y0.copy()
    k1 = rhs(t, y)
    h = min(opts.dt, grid[-1] - t0)
    steps = rejected = positivity_rejected = 0
    evals = 1
    j = 1
    while j < grid.size:
        t_next = grid[j]
        remaining = t_next - t
        # stretch by up to 5% rather than leave a sliver before the sample time
        hs = remaining if 1.05 * h >= remaining else h
        clipped = hs < h
        if hs <= 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow (h={hs:.3e})", t, unpack(t, y))
        k = [k1]
        for s in range(1, 6):
            a = _A[s]
            dy = a[0] * k[0]
            for r in range(1, s):
                dy = dy + a[r] * k[r]
            k.append(rhs(t + _C[s] * hs, y + hs * dy))
        y_new = y + hs * (_B[0] * k[0] + _B[2] * k[2] + _B[3] * k[3] + _B[4] * k[4] + _B[5] * k[5])
        evals += 6
        if not _positivity_ok(y_new, temps, opts.positivity_floor):
            positivity_rejected += 1
            h = 0.5 * hs
            continue
        k7 = rhs(t + hs, y_new)
        evals += 1
        err = hs * (
            _E[0] * k[0] + _E[2] * k[2] + _E[3] * k[3] + _E[4] * k[4] + _E[5] * k[5] + _E[6] * k7
        )
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = math.sqrt(float(np.mean((err / scale) ** 2)))
        if not math.isfinite(err_norm) or err_norm > 1.0:
            rejected += 1
            factor = 0.2 if not math.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** -0.2)
            h = hs * factor
            continue
        steps += 1
        if steps > opts.max_steps:
            raise IntegrationError(f"exceeded max_steps={opts.max_steps}", t, unpack(t, y))
        t = t_next if hs == remaining else t + hs
        y, k1 = y_new, k7
        factor = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
        h_prop = hs * factor
        h = max(h, h_prop) if clipped else h_prop
        if t == t_next:
            times.append(t)
            values.append(y.copy())
            j += 1
    stats = {"steps": steps, "rejected": rejected, "positivity_rejected": positivity_rejected, "evals": evals}
    return np.asarray(times), np.asarray(values), stats


def integrate(
    rhs: Rhs,
    initial_state: InitialState,
    options: IntegratorOptions,
    *,
    params: Optional[ModelParams] = None,
    t_infinity: Optional[float] = None,
) -> Trajectory:
    """Integrate ``rhs`` (acting on packed state vectors) from ``initial_state`` to ``options.t_end``.

    ``initial_state`` is an :class:`EnsembleState` (TK), a :class:`TcsState`,
    or a plain phase vector (Kuramoto, starting at t = 0).
    """
    kind, n, t0, y0 = _pack(initial_state)
    if not options.t_end > t0:
        raise DomainError(f"t_end={options.t_end} must exceed the initial time {t0}")
    temps = _temp_slice(kind, n)
    if temps is not None and np.min(y0[temps]) < options.positivity_floor:
        i = int(np.argmin(y0[temps]))
        raise DomainError(
            f"initial temperature at index {i} is below positivity_floor={options.positivity_floor:g}", index=i
        )

    def unpack(t: float, y: FloatArray) -> InitialState:
        return Trajectory(kind, n, np.array([t]), y[np.newaxis, :]).state(0)

    stepper = _rk4 if options.method == "rk4_fixed" else _dopri
    times, values, stats = stepper(rhs, t0, y0, options, temps, unpack)
    logger.debug("integrated %s system to t=%g: %s", kind, times[-1], stats)
    return Trajectory(kind, n, times, values, params=params, options=options, t_infinity=t_infinity, stats=stats)


def simulate_tk(params: ModelParams, state: EnsembleState, options: IntegratorOptions) -> Trajectory:
    return integrate(tk_field(params), state, options, params=params)


def simulate_kuramoto(
    params: ModelParams, phases: FloatArray, t_infinity: float, options: IntegratorOptions
) -> Trajectory:
    return integrate(kuramoto_field(params, t_infinity), phases, options, params=params, t_infinity=t_infinity)


def simulate_tcs(params: ModelParams, state: TcsState, options: IntegratorOptions) -> Trajectory:
    return integrate(tcs_field(params), state, options, params=params)


def empty_trajectory(kind: str, n: int, params: Optional[ModelParams] = None) -> Trajectory:
    width = {"tk": 2 * n, "kuramoto": n, "tcs": 5 * n}[kind]
    return Trajectory(kind, n, np.empty(0), np.empty((0, width)), params=params)
