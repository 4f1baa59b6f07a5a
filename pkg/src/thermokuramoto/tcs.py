"""
Planar thermodynamic Cucker-Smale (TCS) particles and the heading-angle ansatz.

Each particle has position x_α ∈ ℝ², velocity v_α ∈ ℝ² and temperature T_α.
With v̄ the mean velocity,

    dv_α/dt = (κ₁/N) Σ_β ψ_αβ ((v_β − v̄)/T_β − (v_α − v̄)/T_α)
    d/dt (T_α + |v_α|²/2) = (κ₂/N) Σ_β ζ_αβ (1/T_α − 1/T_β) + dv_α/dt · v̄

which reduces to the rest-frame system when v̄ = 0. Total momentum and
total energy Σ(T_α + |v_α|²/2) are conserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError
from .model import EnsembleState, FloatArray, ModelParams, check_temperatures


@dataclass(frozen=True, eq=False)
class TcsState:
    time: float
    positions: FloatArray
    velocities: FloatArray
    temps: FloatArray

    def __post_init__(self) -> None:
        x = np.array(self.positions, dtype=np.float64).reshape(-1, 2)
        v = np.array(self.velocities, dtype=np.float64).reshape(-1, 2)
        temps = np.array(self.temps, dtype=np.float64).ravel()
        if not (x.shape[0] == v.shape[0] == temps.size):
            raise DomainError("positions, velocities and temps must describe the same particles")
        check_temperatures(temps)
        for arr in (x, v, temps):
            arr.setflags(write=False)
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "temps", temps)

    @property
    def n(self) -> int:
        return int(self.temps.size)

    @property
    def mean_velocity(self) -> FloatArray:
        return self.velocities.mean(axis=0)

    @property
    def momentum(self) -> FloatArray:
        return self.velocities.sum(axis=0)

    @property
    def total_energy(self) -> float:
        return float(np.sum(self.temps) + 0.5 * np.sum(self.velocities ** 2))


class TcsDerivative(NamedTuple):
    dx: FloatArray
    dv: FloatArray
    dtemps: FloatArray
    denergy: FloatArray


def tcs_derivatives(
    velocities: FloatArray, temps: FloatArray, params: ModelParams
) -> TcsDerivative:
    n = temps.size
    vbar = velocities.mean(axis=0)
    w = (velocities - vbar) / temps[:, np.newaxis]
    dv = (params.kappa1 / n) * np.sum(
        params.psi[:, :, np.newaxis] * (w[np.newaxis, :, :] - w[:, np.newaxis, :]), axis=1
    )
    inv = 1.0 / temps
    heat = (params.kappa2 / n) * np.sum(params.zeta * (inv[:, np.newaxis] - inv[np.newaxis, :]), axis=1)
    denergy = heat + dv @ vbar
    # energy = T + |v|²/2, so dT = dE − v·dv (reuses dv instead of re-summing)
    dtemps = denergy - np.sum(velocities * dv, axis=1)
    return TcsDerivative(velocities.copy(), dv, dtemps, denergy)


def tcs_rhs(state: TcsState, params: ModelParams) -> TcsDerivative:
    """Derivatives (dx, dv, dT) plus the per-particle energy rate."""
    check_temperatures(state.temps)
    if state.n != params.n_oscillators:
        raise DomainError(f"state has {state.n} particles, params have {params.n_oscillators}")
    return tcs_derivatives(state.velocities, state.temps, params)


def galilean_shift(state: TcsState, c: ArrayLike) -> TcsState:
    """Boost by constant velocity c: x → x + t·c, v → v + c."""
    c = np.asarray(c, dtype=np.float64).reshape(2)
    return TcsState(
        state.time,
        state.positions + state.time * c,
        state.velocities + c,
        state.temps,
    )


def ring_lattice(n: int, radius: float = 1.0) -> FloatArray:
    """Equally spaced lattice points on a circle of the given radius."""
    angles = 2.0 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def ansatz_embed(
    tk_state: EnsembleState, params: ModelParams, lattice_positions: Optional[ArrayLike] = None
) -> TcsState:
    """Lift a TK state to a TCS state with v_α = η (T_α/T*) e^{iθ_α}."""
    n = tk_state.n
    x = ring_lattice(n) if lattice_positions is None else np.asarray(lattice_positions, dtype=np.float64)
    speed = params.eta * tk_state.temps / params.t_star
    v = speed[:, np.newaxis] * np.column_stack([np.cos(tk_state.phases), np.sin(tk_state.phases)])
    return TcsState(tk_state.time, x, v, tk_state.temps)


def ansatz_project(
    tcs_state: TcsState, params: ModelParams, reference: Optional[ArrayLike] = None
) -> Tuple[FloatArray, FloatArray, float]:
    """Recover (phases, temps, residual) from a TCS state.

    Headings are continued to the branch nearest ``reference`` (e.g. the
    previous sample); without a reference they lie in (−π, π]. The residual
    max_α | |v_α| T* / (η T_α) − 1 | measures distance from the ansatz manifold.
    """
    v = tcs_state.velocities
    speed = np.hypot(v[:, 0], v[:, 1])
    zero = np.flatnonzero(speed == 0)
    if zero.size or params.eta == 0:
        idx = int(zero[0]) if zero.size else None
        raise DomainError("heading undefined for a particle at rest", index=idx)
    heading = np.arctan2(v[:, 1], v[:, 0])
    heading = np.where(heading == -np.pi, np.pi, heading)
    if reference is not None:
        ref = np.asarray(reference, dtype=np.float64)
        delta = np.mod(heading - ref + np.pi, 2.0 * np.pi) - np.pi
        heading = ref + delta
    temps = tcs_state.temps.copy()
    residual = float(np.max(np.abs(speed * params.t_star / (params.eta * temps) - 1.0)))
    return heading, temps, residual
