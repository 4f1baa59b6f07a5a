"""Scenario definition, framework validation, and the canonical form used for hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .analysis import CLAIMS, TCS_CLAIMS, practical_sync_bound
from .equilibrium import is_balanced
from .errors import ConfigError, DomainError, InfeasibleError
from .integrator import IntegratorOptions
from .model import EnsembleState, FloatArray, ModelParams, asymptotic_temperature, diameter
from .tcs import TcsState

PAIRINGS = ("none", "kuramoto_shadow", "tcs_reduction", "twin_l1")

HOMOGENEOUS_CLAIMS = {"diameter_contraction", "sync_rate", "order_functional_nondecreasing"}
LOCKING_CLAIMS = {"quarter_circle", "phase_locking_residual"}


@dataclass(frozen=True)
class RandomInitial:
    """Uniform random phases and temperatures, reproducible from ``seed``."""

    phase_range: Tuple[float, float]
    temp_range: Tuple[float, float]
    seed: int

    def __post_init__(self) -> None:
        lo, hi = self.temp_range
        if not 0 < lo <= hi:
            raise DomainError(f"temp_range must satisfy 0 < lo <= hi, got {self.temp_range}")
        if not self.phase_range[0] <= self.phase_range[1]:
            raise DomainError(f"phase_range must satisfy lo <= hi, got {self.phase_range}")

    def realize(self, n: int) -> EnsembleState:
        rng = np.random.default_rng(self.seed)
        phases = rng.uniform(*self.phase_range, size=n)
        temps = rng.uniform(*self.temp_range, size=n)
        return EnsembleState(0.0, phases, temps)


@dataclass(frozen=True)
class Perturbation:
    """Equal-sum perturbation of initial phases for ℓ¹ twin runs.

    Either explicit ``offsets`` or a random zero-mean vector scaled so its
    largest entry has magnitude ``amplitude``.
    """

    amplitude: float = 0.1
    seed: int = 0
    offsets: Optional[Tuple[float, ...]] = None

    def vector(self, n: int) -> FloatArray:
        if self.offsets is not None:
            off = np.asarray(self.offsets, dtype=np.float64)
            if off.size != n:
                raise DomainError(f"perturbation has {off.size} offsets, expected {n}")
            return off
        rng = np.random.default_rng(self.seed)
        off = rng.uniform(-1.0, 1.0, size=n)
        off -= off.mean()
        peak = np.max(np.abs(off))
        return off * (self.amplitude / peak) if peak > 0 else off


Initial = Union[EnsembleState, TcsState, RandomInitial]


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    params: ModelParams
    initial: Initial
    options: IntegratorOptions = field(default_factory=IntegratorOptions)
    claims: Tuple[str, ...] = ()
    pairing: str = "none"
    perturbation: Optional[Perturbation] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "claims", tuple(self.claims))
        if self.pairing not in PAIRINGS:
            raise ConfigError(f"unknown pairing {self.pairing!r}; expected one of {PAIRINGS}")
        known = CLAIMS + TCS_CLAIMS
        unknown = [c for c in self.claims if c not in known]
        if unknown:
            raise ConfigError(f"unknown claim id(s): {', '.join(unknown)}")

    @property
    def seed(self) -> Optional[int]:
        if isinstance(self.initial, RandomInitial):
            return self.initial.seed
        return None

    def initial_state(self) -> Union[EnsembleState, TcsState]:
        if isinstance(self.initial, RandomInitial):
            return self.initial.realize(self.params.n_oscillators)
        return self.initial

    def to_dict(self) -> Dict[str, Any]:
        return scenario_to_dict(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return scenario_to_dict(self) == scenario_to_dict(other)

    __hash__ = None  # type: ignore[assignment]

    @property
    def hash(self) -> str:
        return scenario_hash(self)


def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    p = s.params
    model = {
        "n": p.n_oscillators,
        "kappa1": p.kappa1,
        "kappa2": p.kappa2,
        "eta": p.eta,
        "t_star": p.t_star,
        "nu": p.nat_freq.tolist(),
        "psi": p.psi.tolist(),
        "zeta": p.zeta.tolist(),
    }
    init = s.initial
    if isinstance(init, RandomInitial):
        initial: Dict[str, Any] = {
            "phase_range": [float(init.phase_range[0]), float(init.phase_range[1])],
            "temp_range": [float(init.temp_range[0]), float(init.temp_range[1])],
            "seed": int(init.seed),
        }
    elif isinstance(init, TcsState):
        initial = {
            "time": init.time,
            "positions": init.positions.tolist(),
            "velocities": init.velocities.tolist(),
            "temps": init.temps.tolist(),
        }
    else:
        initial = {"time": init.time, "phases": init.phases.tolist(), "temps": init.temps.tolist()}
    o = s.options
    integrator = {
        "method": o.method,
        "dt": o.dt,
        "rel_tol": o.rel_tol,
        "abs_tol": o.abs_tol,
        "t_end": o.t_end,
        "output_stride": int(o.output_stride),
        "positivity_floor": o.positivity_floor,
    }
    if o.sample_interval is not None:
        integrator["sample_interval"] = o.sample_interval
    out: Dict[str, Any] = {
        "name": s.name,
        "model": model,
        "initial": initial,
        "integrator": integrator,
        "claims": {"ids": list(s.claims), "pairing": s.pairing},
    }
    if s.perturbation is not None:
        pert: Dict[str, Any] = {"amplitude": s.perturbation.amplitude, "seed": int(s.perturbation.seed)}
        if s.perturbation.offsets is not None:
            pert["offsets"] = [float(x) for x in s.perturbation.offsets]
        out["perturbation"] = pert
    return out


def scenario_hash(s: Scenario) -> str:
    """SHA-256 over the canonical JSON of every semantic field (the name is a label, not semantics)."""
    d = scenario_to_dict(s)
    d.pop("name")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()


# -- framework checks ---------------------------------------------------------------


def locking_ratio(params: ModelParams, t_ref: float) -> float:
    """D(ν) t_ref / (κ₁ψ_min); must stay below 1 for bounded phase diameters."""
    if params.psi_min == 0:
        return math.inf if params.nu_diameter > 0 else 0.0
    return params.nu_diameter * t_ref / (params.kappa1 * params.psi_min)


def check_locking_framework(params: ModelParams, phases: FloatArray, temps: FloatArray) -> None:
    """Positive network, balanced frequencies, and the diameter condition D(θ) < π − θ*."""
    if not params.positive_network:
        raise InfeasibleError("positive network: psi_min > 0 and zeta_min > 0 required")
    if params.kappa2 <= 0:
        raise InfeasibleError("kappa2 > 0 required")
    if not is_balanced(params):
        raise InfeasibleError(f"balance: sum(nu) = {np.sum(params.nat_freq):.3e} != 0")
    t_max = float(np.max(temps))
    ratio = locking_ratio(params, t_max)
    if ratio >= 1:
        raise InfeasibleError(f"locking: D(nu)*T_max_in/(kappa1*psi_min) = {ratio:.6g} >= 1")
    theta_star = math.asin(ratio)
    d = float(diameter(phases))
    if d >= math.pi - theta_star:
        raise InfeasibleError(f"diameter: D(theta_in) = {d:.6g} >= pi - theta_star = {math.pi - theta_star:.6g}")


def check_homogeneous_framework(params: ModelParams, phases: FloatArray, need_half_circle: bool = True) -> None:
    if params.nu_diameter != 0:
        raise InfeasibleError("homogeneous: identical natural frequencies required")
    if need_half_circle:
        if not params.positive_network:
            raise InfeasibleError("positive network: psi_min > 0 and zeta_min > 0 required")
        d = float(diameter(phases))
        if d >= math.pi:
            raise InfeasibleError(f"half circle: D(theta_in) = {d:.6g} >= pi")


def check_twin_framework(params: ModelParams, t_infinity: float, phases_a: FloatArray, phases_b: FloatArray) -> None:
    if params.psi_min <= 0:
        raise InfeasibleError("positive network: psi_min > 0 required")
    scale = 1.0 + float(np.sum(np.abs(phases_a)))
    if abs(float(np.sum(phases_a) - np.sum(phases_b))) > 1e-12 * scale:
        raise DomainError("twin initial phases must share the same sum")
    ratio = locking_ratio(params, t_infinity)
    if ratio >= 1:
        raise InfeasibleError(f"locking: D(nu)*T_inf/(kappa1*psi_min) = {ratio:.6g} >= 1")
    limit = math.pi - math.asin(ratio)
    d = max(float(diameter(phases_a)), float(diameter(phases_b)))
    if d >= limit:
        raise InfeasibleError(f"diameter: max twin D(phi_in) = {d:.6g} >= pi - arcsin(ratio) = {limit:.6g}")


def validate_scenario(s: Scenario) -> Union[EnsembleState, TcsState]:
    """Check every framework inequality the scenario's claims rely on.

    Returns the realized initial state; raises :class:`InfeasibleError`
    naming the first violated condition.
    """
    state = s.initial_state()
    n = s.params.n_oscillators
    if state.n != n:
        raise DomainError(f"initial state has {state.n} oscillators, model has {n}")
    p = s.params
    if isinstance(state, TcsState):
        bad = [c for c in s.claims if c not in TCS_CLAIMS]
        if bad:
            raise ConfigError(f"claims {bad} need a phase-temperature initial state")
        return state
    tcs_only = [c for c in s.claims if c in TCS_CLAIMS]
    if tcs_only:
        raise ConfigError(f"claims {tcs_only} need a TCS initial state")
    claims = set(s.claims)
    if claims & {"temperature_consensus_rate", "asymptotic_temperature"}:
        if p.kappa2 <= 0 or p.zeta_min <= 0:
            raise InfeasibleError("temperature consensus: kappa2 > 0 and zeta_min > 0 required")
    if claims & {"diameter_contraction", "sync_rate"}:
        check_homogeneous_framework(p, state.phases)
    if "bipolar_classification" in claims:
        check_homogeneous_framework(p, state.phases, need_half_circle=False)
        if p.psi_min != p.psi_max:
            raise InfeasibleError("bipolar: constant coupling matrix psi required")
    if "order_functional_nondecreasing" in claims:
        check_homogeneous_framework(p, state.phases, need_half_circle=False)
    if claims & LOCKING_CLAIMS or s.pairing == "kuramoto_shadow":
        check_locking_framework(p, state.phases, state.temps)
    if s.pairing == "tcs_reduction" and np.any(p.nat_freq != 0):
        raise InfeasibleError("tcs reduction: nu = 0 required")
    if s.pairing == "twin_l1":
        pert = s.perturbation or Perturbation()
        t_inf = asymptotic_temperature(state.temps, p.eta, p.t_star)
        check_twin_framework(p, t_inf, state.phases, state.phases + pert.vector(n))
    return state


def quarter_circle_bound(params: ModelParams, temps_in: FloatArray) -> Optional[float]:
    t_inf = asymptotic_temperature(temps_in, params.eta, params.t_star)
    return practical_sync_bound(params.nu_diameter, t_inf, params)
