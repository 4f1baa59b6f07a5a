"""
Thermodynamic Kuramoto (TK) model: parameters, state, vector fields, observables.

Each oscillator carries a phase θ_α (unwrapped, real-valued) and a
temperature T_α > 0:

    dθ_α/dt = ν_α + (κ₁/N) Σ_β (ψ_αβ / T_α) sin(θ_β − θ_α)
    dT_α/dt = (κ₂/N) Σ_β ζ_αβ T*² / (T*² + η² T_α) · (1/T_α − 1/T_β)

With all temperatures frozen at a common value T∞ the phase equation is
the classical Kuramoto model with coupling κ₁/T∞.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError

FloatArray = NDArray[np.float64]


def _as_matrix(value: ArrayLike, n: int, name: str) -> FloatArray:
    m = np.asarray(value, dtype=np.float64)
    if m.ndim == 0:
        m = np.full((n, n), float(m))
    if m.shape != (n, n):
        raise DomainError(f"{name} must be {n}x{n}, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class ModelParams:
    """System parameters of the TK model.

    ``psi`` and ``zeta`` accept a scalar (expanded to a constant matrix) or an
    N×N symmetric array. Diagonal entries are dynamically inert but do enter
    ``psi_min``/``zeta_min``, which range over all index pairs.
    """

    kappa1: float
    kappa2: float
    eta: float
    t_star: float
    nat_freq: FloatArray
    psi: FloatArray
    zeta: FloatArray

    def __post_init__(self) -> None:
        nu = np.asarray(self.nat_freq, dtype=np.float64).ravel()
        n = nu.size
        if n < 1:
            raise DomainError("at least one oscillator is required")
        psi = _as_matrix(self.psi, n, "psi")
        zeta = _as_matrix(self.zeta, n, "zeta")
        for name, m in (("psi", psi), ("zeta", zeta)):
            if not np.all(np.isfinite(m)):
                raise DomainError(f"{name} has non-finite entries")
            if not np.array_equal(m, m.T):
                i, j = np.argwhere(m != m.T)[0]
                raise DomainError(f"{name} is not symmetric: entry ({i},{j}) != ({j},{i})")
            if np.any(m < 0):
                raise DomainError(f"{name} has negative entries")
        if not np.all(np.isfinite(nu)):
            raise DomainError("nat_freq has non-finite entries")
        if not self.kappa1 > 0:
            raise DomainError(f"kappa1 must be positive, got {self.kappa1}")
        # kappa2 = 0 freezes temperatures; still a valid (isothermal) system.
        if not self.kappa2 >= 0:
            raise DomainError(f"kappa2 must be nonnegative, got {self.kappa2}")
        if not self.eta >= 0:
            raise DomainError(f"eta must be nonnegative, got {self.eta}")
        if not self.t_star > 0:
            raise DomainError(f"t_star must be positive, got {self.t_star}")
        object.__setattr__(self, "kappa1", float(self.kappa1))
        object.__setattr__(self, "kappa2", float(self.kappa2))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "t_star", float(self.t_star))
        for name, arr in (("nat_freq", nu), ("psi", psi), ("zeta", zeta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(
        cls,
        n: int,
        kappa1: float = 1.0,
        kappa2: float = 1.0,
        eta: float = 0.0,
        t_star: float = 1.0,
        nat_freq: Optional[ArrayLike] = None,
        psi: ArrayLike = 1.0,
        zeta: ArrayLike = 1.0,
    ) -> "ModelParams":
        nu = np.zeros(n) if nat_freq is None else nat_freq
        return cls(kappa1, kappa2, eta, t_star, nu, psi, zeta)

    def replace(self, **changes) -> "ModelParams":
        fields = dict(
            kappa1=self.kappa1, kappa2=self.kappa2, eta=self.eta, t_star=self.t_star,
            nat_freq=self.nat_freq, psi=self.psi, zeta=self.zeta,
        )
        fields.update(changes)
        return ModelParams(**fields)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            (self.kappa1, self.kappa2, self.eta, self.t_star)
            == (other.kappa1, other.kappa2, other.eta, other.t_star)
            and np.array_equal(self.nat_freq, other.nat_freq)
            and np.array_equal(self.psi, other.psi)
            and np.array_equal(self.zeta, other.zeta)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_oscillators(self) -> int:
        return int(self.nat_freq.size)

    @property
    def psi_min(self) -> float:
        return float(self.psi.min())

    @property
    def psi_max(self) -> float:
        return float(self.psi.max())

    @property
    def zeta_min(self) -> float:
        return float(self.zeta.min())

    @property
    def zeta_max(self) -> float:
        return float(self.zeta.max())

    @property
    def positive_network(self) -> bool:
        """True when every coupling weight is strictly positive (not merely nonnegative)."""
        return self.psi_min > 0 and self.zeta_min > 0

    @property
    def nu_diameter(self) -> float:
        return float(self.nat_freq.max() - self.nat_freq.min())


@dataclass(frozen=True, eq=False)
class EnsembleState:
    time: float
    phases: FloatArray
    temps: FloatArray

    def __post_init__(self) -> None:
        phases = np.array(self.phases, dtype=np.float64).ravel()
        temps = np.array(self.temps, dtype=np.float64).ravel()
        if phases.shape != temps.shape:
            raise DomainError(f"phases and temps differ in length: {phases.size} vs {temps.size}")
        if not np.all(np.isfinite(phases)):
            raise DomainError("phases must be finite", index=int(np.argmin(np.isfinite(phases))))
        check_temperatures(temps)
        phases.setflags(write=False)
        temps.setflags(write=False)
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "temps", temps)

    @property
    def n(self) -> int:
        return int(self.phases.size)


@dataclass(frozen=True)
class Observables:
    entropy: float
    phase_diameter: float
    temp_diameter: float
    order_parameter: float
    conserved_g: float
    phase_sum: float
    avg_phase: float


def check_temperatures(temps: FloatArray) -> None:
    bad = np.flatnonzero(~(temps > 0))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"temperature at index {i} is not positive: {temps[i]!r}", index=i)


def coupling_sums(phases: FloatArray, psi: FloatArray) -> FloatArray:
    """Row sums Σ_β ψ_αβ sin(θ_β − θ_α)."""
    diff = phases[np.newaxis, :] - phases[:, np.newaxis]
    return np.sum(psi * np.sin(diff), axis=1)


def temperature_rates(temps: FloatArray, params: ModelParams) -> FloatArray:
    inv = 1.0 / temps
    # explicit pairwise differences keep dT exactly zero for equal temperatures
    flux = np.sum(params.zeta * (inv[:, np.newaxis] - inv[np.newaxis, :]), axis=1)
    ts2 = params.t_star ** 2
    n = temps.size
    return (params.kappa2 / n) * ts2 / (ts2 + params.eta ** 2 * temps) * flux


def tk_rhs(state: EnsembleState, params: ModelParams) -> Tuple[FloatArray, FloatArray]:
    """Return (dθ/dt, dT/dt) of the TK model at ``state``."""
    temps = np.asarray(state.temps, dtype=np.float64)
    check_temperatures(temps)
    n = temps.size
    if n != params.n_oscillators:
        raise DomainError(f"state has {n} oscillators, params have {params.n_oscillators}")
    phases = np.asarray(state.phases, dtype=np.float64)
    dphases = params.nat_freq + (params.kappa1 / n) * coupling_sums(phases, params.psi) / temps
    return dphases, temperature_rates(temps, params)


def kuramoto_rhs(phases: ArrayLike, params: ModelParams, t_infinity: float) -> FloatArray:
    """Kuramoto vector field with every temperature frozen at ``t_infinity``."""
    if not t_infinity > 0:
        raise DomainError(f"t_infinity must be positive, got {t_infinity}")
    phases = np.asarray(phases, dtype=np.float64)
    n = phases.size
    if n != params.n_oscillators:
        raise DomainError(f"{n} phases given, params have {params.n_oscillators}")
    return params.nat_freq + (params.kappa1 / n) * coupling_sums(phases, params.psi) / t_infinity


def entropy(state: EnsembleState) -> float:
    temps = np.asarray(state.temps)
    check_temperatures(temps)
    return float(np.sum(np.log(temps)))


def entropy_production(state: EnsembleState, params: ModelParams) -> float:
    """dS/dt = Σ_α Ṫ_α / T_α."""
    _, dtemps = tk_rhs(state, params)
    return float(np.sum(dtemps / state.temps))


def conserved_functional(temps: ArrayLike, eta: float, t_star: float) -> float | FloatArray:
    """Σ_α (T_α + η²/(2T*²) T_α²) along the last axis; invariant under the TK flow."""
    temps = np.asarray(temps, dtype=np.float64)
    a = eta ** 2 / (2.0 * t_star ** 2)
    return np.sum(temps + a * temps ** 2, axis=-1)


def order_parameter(phases: ArrayLike) -> float | FloatArray:
    """R = |mean e^{iθ}| along the last axis."""
    phases = np.asarray(phases, dtype=np.float64)
    r = np.abs(np.mean(np.exp(1j * phases), axis=-1))
    return np.minimum(r, 1.0)


def diameter(values: ArrayLike) -> float | FloatArray:
    values = np.asarray(values, dtype=np.float64)
    return np.max(values, axis=-1) - np.min(values, axis=-1)


def order_functional(phases: ArrayLike, psi: FloatArray) -> float:
    """Σ_{α,β} ψ_αβ cos(θ_α − θ_β); nondecreasing along homogeneous flows."""
    phases = np.asarray(phases, dtype=np.float64)
    return float(np.sum(psi * np.cos(phases[:, np.newaxis] - phases[np.newaxis, :])))


def observables(state: EnsembleState, params: ModelParams) -> Observables:
    phases, temps = state.phases, state.temps
    return Observables(
        entropy=float(np.sum(np.log(temps))),
        phase_diameter=float(diameter(phases)),
        temp_diameter=float(diameter(temps)),
        order_parameter=float(order_parameter(phases)),
        conserved_g=float(conserved_functional(temps, params.eta, params.t_star)),
        phase_sum=float(np.sum(phases)),
        avg_phase=float(np.mean(phases)),
    )


def asymptotic_temperature(temps_in: ArrayLike, eta: float, t_star: float) -> float:
    """Common limit temperature T∞ fixed by conservation of Σ(T + η²T²/(2T*²)).

    Solves a·T² + T = c with a = η²/(2T*²) and c the mean functional value,
    using the cancellation-free root 2c / (1 + √(1 + 4ac)).
    """
    temps = np.asarray(temps_in, dtype=np.float64).ravel()
    check_temperatures(temps)
    a = eta ** 2 / (2.0 * t_star ** 2)
    c = float(np.mean(temps + a * temps ** 2))
    if a == 0.0:
        return c
    return 2.0 * c / (1.0 + math.sqrt(1.0 + 4.0 * a * c))
