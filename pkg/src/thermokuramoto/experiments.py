"""
Scenario runners: single runs with claim verification, paired TK/Kuramoto
shadow runs, equal-sum Kuramoto twins, the TCS reduction comparison, and
seeded Monte Carlo campaigns over each claim family.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .analysis import (
    TCS_CLAIMS,
    ClaimVerdict,
    DEFAULT_TOLERANCES,
    _verdict,
    fit_decay,
    l1_distance,
    l1_stability_rate_bound,
    monotone_violation,
    practical_sync_bound,
    sync_rate_bound,
    tail_slice,
    tail_variation,
    temp_decay_bound,
    verify_tcs_trajectory,
    verify_trajectory,
)
from .equilibrium import shift_bound
from .errors import ConfigError, DomainError, FitError, InfeasibleError
from .integrator import IntegratorOptions, Trajectory, simulate_kuramoto, simulate_tcs, simulate_tk
from .model import EnsembleState, ModelParams, asymptotic_temperature
from .scenario import (
    Perturbation,
    RandomInitial,
    Scenario,
    check_twin_framework,
    locking_ratio,
    validate_scenario,
)
from .tcs import TcsState, ansatz_embed, ansatz_project, galilean_shift

logger = logging.getLogger(__name__)

SHADOW_SPREAD_TOL = 1e-5
GALILEAN_BOOST = (0.5, -0.25)


def _jsonable(x: Any) -> Any:
    """Plain-JSON view: arrays become lists, NaN becomes null, ±inf becomes a string."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        f = float(x)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, ClaimVerdict):
        return _jsonable(x.to_dict())
    return x


@dataclass
class VerificationReport:
    scenario_name: str
    scenario_hash: str
    seed: Optional[int]
    verdicts: List[ClaimVerdict] = field(default_factory=list)
    measurements: Dict[str, Any] = field(default_factory=dict)
    findings: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, claim_id: str) -> ClaimVerdict:
        for v in self.verdicts:
            if v.claim_id == claim_id:
                return v
        raise KeyError(claim_id)

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable({
            "scenario_name": self.scenario_name,
            "scenario_hash": self.scenario_hash,
            "seed": self.seed,
            "passed": self.passed,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "measurements": self.measurements,
            "findings": self.findings,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _report_seed(s: Scenario) -> Optional[int]:
    if s.seed is not None:
        return s.seed
    return s.perturbation.seed if s.perturbation is not None else None


# -- paired experiments ---------------------------------------------------------------


@dataclass
class ShadowReport:
    z: float
    spread: float
    bound: float
    t_infinity: float
    tk_tail_variation: float
    kuramoto_tail_variation: float
    converged: bool
    verdicts: List[ClaimVerdict]
    trajectories: Tuple[Trajectory, Trajectory]

    def summary(self) -> Dict[str, Any]:
        return {
            "z": self.z, "spread": self.spread, "shift_bound": self.bound, "t_infinity": self.t_infinity,
            "tk_tail_variation": self.tk_tail_variation,
            "kuramoto_tail_variation": self.kuramoto_tail_variation, "converged": self.converged,
        }


def kuramoto_shadow(
    scenario: Scenario,
    *,
    spread_tol: float = SHADOW_SPREAD_TOL,
    certificate: float = DEFAULT_TOLERANCES["convergence_certificate"],
) -> ShadowReport:
    """Run TK and its frozen-temperature Kuramoto shadow from the same phases.

    The limits differ by a uniform translation z; the report compares the
    residual spread against ``spread_tol`` and |z| against :func:`shift_bound`.
    """
    state = scenario.initial_state()
    if not isinstance(state, EnsembleState):
        raise ConfigError("kuramoto_shadow needs a phase-temperature initial state")
    p = scenario.params
    t_inf = asymptotic_temperature(state.temps, p.eta, p.t_star)
    tk = simulate_tk(p, state, scenario.options)
    km = simulate_kuramoto(p, state.phases, t_inf, scenario.options.replace(t_end=scenario.options.t_end - state.time))
    var_tk, var_km = tail_variation(tk.phases), tail_variation(km.phases)
    diff = tk.phases[-1] - km.phases[-1]
    z = float(np.mean(diff))
    spread = float(np.max(np.abs(diff - z)))
    bound = shift_bound(p, state.temps)
    converged = var_tk < certificate and var_km < certificate
    if converged:
        verdicts = [
            _verdict("shadow_spread", spread, 0.0, spread_tol, notes="max |theta - phi - z|"),
            _verdict("shadow_shift_bound", abs(z), bound, 0.0, notes=f"z={z:.6e}"),
        ]
    else:
        note = f"inconclusive: tail variation TK {var_tk:.3e}, Kuramoto {var_km:.3e}"
        verdicts = [
            ClaimVerdict("shadow_spread", spread, 0.0, spread_tol, False, note),
            ClaimVerdict("shadow_shift_bound", abs(z), bound, 0.0, False, note),
        ]
    return ShadowReport(z, spread, bound, t_inf, var_tk, var_km, converged, verdicts, (tk, km))


@dataclass
class L1Report:
    rate: float
    bound: float
    d_infinity: float
    tail_increase: float
    initial_distance: float
    verdicts: List[ClaimVerdict]
    trajectories: Tuple[Trajectory, Trajectory]
    distance: np.ndarray

    def summary(self) -> Dict[str, Any]:
        return {
            "rate": self.rate, "bound": self.bound, "d_infinity": self.d_infinity,
            "tail_increase": self.tail_increase, "initial_distance": self.initial_distance,
        }


def twin_l1(scenario: Scenario, perturbation: Optional[Perturbation] = None) -> L1Report:
    """Two Kuramoto runs from equal-sum initial phases; ℓ¹ contraction vs. its rate bound."""
    state = scenario.initial_state()
    if not isinstance(state, EnsembleState):
        raise ConfigError("twin_l1 needs a phase-temperature initial state")
    p = scenario.params
    pert = perturbation or scenario.perturbation or Perturbation()
    a = state.phases
    b = a + pert.vector(p.n_oscillators)
    t_inf = asymptotic_temperature(state.temps, p.eta, p.t_star)
    check_twin_framework(p, t_inf, a, b)
    opts = scenario.options.replace(t_end=scenario.options.t_end - state.time)
    ta = simulate_kuramoto(p, a, t_inf, opts)
    tb = simulate_kuramoto(p, b, t_inf, opts)
    dist = np.asarray(l1_distance(ta.phases, tb.phases))
    tail = tail_slice(dist.size)
    d_tail = float(max(np.max(ta.observables["phase_diameter"][tail]), np.max(tb.observables["phase_diameter"][tail])))
    d_inf = min(d_tail + 0.01, math.pi / 2 - 1e-9)
    bound = l1_stability_rate_bound(p, t_inf, d_inf)
    tol = DEFAULT_TOLERANCES
    increase = monotone_violation(dist[tail], increasing=False)
    verdicts: List[ClaimVerdict] = []
    if dist[0] == 0.0:
        rate = math.inf
        # zero distance for all time: every decay rate holds
        verdicts.append(ClaimVerdict("l1_rate", rate, tol["rate_factor"] * bound, 0.0, True, "identical twins", "ge"))
    else:
        try:
            fit = fit_decay(ta.times, dist, window_fraction=tol["fit_window"], floor=tol["fit_floor"])
            rate = fit.rate
            verdicts.append(_verdict("l1_rate", rate, tol["rate_factor"] * bound, 0.0, "ge",
                                     notes=f"D_inf={d_inf:.6g}, r2={fit.r_squared:.6f}"))
        except FitError as exc:
            rate = math.nan
            verdicts.append(ClaimVerdict("l1_rate", rate, tol["rate_factor"] * bound, 0.0, False,
                                         f"fit failed: {exc}", "ge"))
    verdicts.append(_verdict("l1_tail_monotone", increase, 0.0, tol["monotone_slack"],
                             notes="largest increase between consecutive tail samples"))
    return L1Report(rate, bound, d_inf, increase, float(dist[0]), verdicts, (ta, tb), dist)


def galilean_discrepancy(
    params: ModelParams, state: TcsState, options: IntegratorOptions, boost: Sequence[float] = GALILEAN_BOOST
) -> float:
    """Max |evolve-then-boost − boost-then-evolve| over positions, velocities and temperatures."""
    direct = simulate_tcs(params, state, options).state(-1)
    boosted_first = simulate_tcs(params, galilean_shift(state, boost), options).state(-1)
    after = galilean_shift(direct, boost)
    return float(max(
        np.max(np.abs(after.positions - boosted_first.positions)),
        np.max(np.abs(after.velocities - boosted_first.velocities)),
        np.max(np.abs(after.temps - boosted_first.temps)),
    ))


@dataclass
class ReductionReport:
    times: np.ndarray
    phase_deviation: np.ndarray
    temp_deviation: np.ndarray
    ansatz_residual: np.ndarray
    galilean_discrepancy: float
    trajectories: Tuple[Trajectory, Trajectory]

    @property
    def max_phase_deviation(self) -> float:
        return float(np.max(self.phase_deviation))

    @property
    def max_temp_deviation(self) -> float:
        return float(np.max(self.temp_deviation))

    def findings(self) -> Dict[str, Any]:
        return {
            "max_phase_deviation": self.max_phase_deviation,
            "max_temp_deviation": self.max_temp_deviation,
            "max_ansatz_residual": float(np.max(self.ansatz_residual)),
            "galilean_discrepancy": self.galilean_discrepancy,
            "times": self.times,
            "phase_deviation": self.phase_deviation,
            "temp_deviation": self.temp_deviation,
            "ansatz_residual": self.ansatz_residual,
        }


def tcs_reduction(scenario: Scenario, lattice_positions=None) -> ReductionReport:
    """Compare TK against TCS started on the ansatz manifold. Findings only, no verdicts."""
    state = scenario.initial_state()
    if not isinstance(state, EnsembleState):
        raise ConfigError("tcs_reduction needs a phase-temperature initial state")
    p = scenario.params
    if np.any(p.nat_freq != 0):
        raise InfeasibleError("tcs reduction: nu = 0 required")
    tk = simulate_tk(p, state, scenario.options)
    lifted = ansatz_embed(state, p, lattice_positions)
    tcs = simulate_tcs(p, lifted, scenario.options)
    m = min(len(tk), len(tcs))
    dphi, dtemp, resid = np.empty(m), np.empty(m), np.empty(m)
    heading = state.phases
    for k in range(m):
        heading, temps, r = ansatz_project(tcs.state(k), p, reference=heading)
        dphi[k] = np.max(np.abs(heading - tk.phases[k]))
        dtemp[k] = np.max(np.abs(temps - tk.temps[k]))
        resid[k] = r
    gal = galilean_discrepancy(p, lifted, scenario.options)
    return ReductionReport(tk.times[:m].copy(), dphi, dtemp, resid, gal, (tk, tcs))


# -- single scenario ---------------------------------------------------------------------


def _bounds(p: ModelParams, state: EnsembleState) -> Dict[str, Any]:
    t_inf = asymptotic_temperature(state.temps, p.eta, p.t_star)
    out: Dict[str, Any] = {"t_infinity": t_inf, "sync_rate_bound": sync_rate_bound(p, t_inf)}
    if p.zeta_min > 0 and p.kappa2 > 0:
        out["temp_decay_bound"] = temp_decay_bound(p, t_inf)
    out["practical_sync_bound"] = practical_sync_bound(p.nu_diameter, t_inf, p)
    out["shift_bound"] = shift_bound(p, state.temps)
    out["locking_ratio_t_max"] = locking_ratio(p, float(np.max(state.temps)))
    return out


RunResult = Union[Trajectory, Tuple[Trajectory, Trajectory]]


def run_scenario(scenario: Scenario) -> Tuple[RunResult, VerificationReport]:
    """Validate, integrate, and verify a scenario.

    Raises :class:`InfeasibleError` before any integration when a framework
    inequality fails. Paired scenarios return both trajectories.
    """
    state = validate_scenario(scenario)
    p = scenario.params
    report = VerificationReport(scenario.name, scenario.hash, _report_seed(scenario))

    if isinstance(state, TcsState):
        traj = simulate_tcs(p, state, scenario.options)
        report.verdicts.extend(verify_tcs_trajectory(traj, scenario.claims))
        if "galilean_invariance" in scenario.claims:
            gal = galilean_discrepancy(p, state, scenario.options)
            report.verdicts.append(_verdict("galilean_invariance", gal, 0.0, DEFAULT_TOLERANCES["galilean"],
                                            notes=f"boost {GALILEAN_BOOST}"))
        report.measurements["initial_energy"] = state.total_energy
        report.measurements["initial_momentum"] = state.momentum
        return traj, report

    report.measurements.update(_bounds(p, state))
    result: RunResult
    if scenario.pairing == "twin_l1":
        l1 = twin_l1(scenario)
        report.verdicts.extend(l1.verdicts)
        report.measurements["l1"] = l1.summary()
        result = l1.trajectories
        tk = None
    else:
        tk = simulate_tk(p, state, scenario.options)
        result = tk
    if tk is not None and scenario.claims:
        report.verdicts.extend(verify_trajectory(tk, p, scenario.claims))
    elif scenario.claims:
        # twin runs are Kuramoto; claims still refer to the TK flow from the base state
        tk = simulate_tk(p, state, scenario.options)
        report.verdicts.extend(verify_trajectory(tk, p, scenario.claims))
    if scenario.pairing == "kuramoto_shadow":
        sh = kuramoto_shadow(scenario)
        report.verdicts.extend(sh.verdicts)
        report.measurements["shadow"] = sh.summary()
        result = sh.trajectories
    elif scenario.pairing == "tcs_reduction":
        red = tcs_reduction(scenario)
        report.findings["tcs_reduction"] = red.findings()
        result = red.trajectories
    for v in report.verdicts:
        if v.claim_id.endswith("_rate"):
            report.measurements[f"{v.claim_id}_fitted"] = v.measured
    return result, report


# -- random scenario families ------------------------------------------------------------


def _sym(rng: np.random.Generator, n: int, lo: float, hi: float) -> np.ndarray:
    m = rng.uniform(lo, hi, size=(n, n))
    return np.triu(m) + np.triu(m, 1).T


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2 ** 31 - 1))


def _options(t_end: float, rel_tol: float = 1e-10, n_samples: int = 400) -> IntegratorOptions:
    return IntegratorOptions(
        method="rk45_adaptive", dt=1e-3, rel_tol=rel_tol, abs_tol=1e-13,
        t_end=float(t_end), sample_interval=float(t_end) / n_samples,
    )


def _balanced_nu(rng: np.random.Generator, n: int, d_lo: float, d_hi: float) -> np.ndarray:
    nu = rng.uniform(-1.0, 1.0, size=n)
    nu -= nu.mean()
    nu *= rng.uniform(d_lo, d_hi) / (nu.max() - nu.min())
    nu -= nu.mean()
    return nu


def sample_thermo(rng: np.random.Generator, index: int = 0) -> Scenario:
    """Generic TK runs: arbitrary frequencies, nonnegative ψ, positive ζ."""
    n = int(rng.integers(3, 11))
    params = ModelParams(
        kappa1=rng.uniform(0.1, 3.0), kappa2=rng.uniform(0.1, 3.0), eta=rng.uniform(0.0, 2.0),
        t_star=rng.uniform(0.5, 2.0), nat_freq=rng.uniform(-1.0, 1.0, size=n),
        psi=_sym(rng, n, 0.0, 1.0), zeta=_sym(rng, n, 0.1, 1.0),
    )
    init = RandomInitial((-math.pi, math.pi), (0.2, 5.0), _seed(rng))
    return Scenario(f"thermo-{index}", params, init, _options(20.0, n_samples=200),
                    ("entropy_nondecreasing", "temperature_bounds", "conserved_functional"))


def sample_consensus(rng: np.random.Generator, index: int = 0) -> Scenario:
    n = int(rng.integers(3, 11))
    params = ModelParams(
        kappa1=rng.uniform(0.5, 2.0), kappa2=rng.uniform(1.0, 2.0), eta=rng.uniform(0.0, 0.5), t_star=1.0,
        nat_freq=rng.uniform(-1.0, 1.0, size=n), psi=_sym(rng, n, 0.5, 1.0), zeta=_sym(rng, n, 0.5, 1.0),
    )
    init = RandomInitial((-math.pi, math.pi), (0.5, 1.5), _seed(rng))
    state = init.realize(n)
    bound = temp_decay_bound(params, asymptotic_temperature(state.temps, params.eta, params.t_star))
    return Scenario(f"consensus-{index}", params, init, _options(min(200.0, 30.0 / bound)),
                    ("temperature_consensus_rate", "asymptotic_temperature"))


def sample_homogeneous(rng: np.random.Generator, index: int = 0) -> Scenario:
    n = int(rng.integers(3, 11))
    params = ModelParams(
        kappa1=rng.uniform(0.5, 1.5), kappa2=rng.uniform(2.0, 4.0), eta=rng.uniform(0.0, 0.5), t_star=1.0,
        nat_freq=np.zeros(n), psi=_sym(rng, n, 0.5, 1.0), zeta=_sym(rng, n, 0.5, 1.0),
    )
    width = rng.uniform(0.5, math.pi - 0.15)
    centre = rng.uniform(-math.pi, math.pi)
    init = RandomInitial((centre - width / 2, centre + width / 2), (0.5, 1.0), _seed(rng))
    rate = params.kappa1 * params.psi_min / 1.0
    t_end = min(200.0, 35.0 / rate)
    return Scenario(f"homogeneous-{index}", params, init, _options(t_end),
                    ("diameter_contraction", "sync_rate", "order_functional_nondecreasing"))


def _locking_params(rng: np.random.Generator, n: int, t_ref: float) -> Tuple[ModelParams, float]:
    """Balanced frequencies and κ₁ chosen so D(ν) t_ref / (κ₁ψ_min) lands in [0.2, 0.7]."""
    nu = _balanced_nu(rng, n, 0.5, 1.5)
    psi = _sym(rng, n, 0.5, 1.0)
    ratio = rng.uniform(0.2, 0.7)
    kappa1 = (nu.max() - nu.min()) * t_ref / (ratio * psi.min())
    params = ModelParams(kappa1=kappa1, kappa2=rng.uniform(2.0, 4.0), eta=rng.uniform(0.0, 0.5), t_star=1.0,
                         nat_freq=nu, psi=psi, zeta=_sym(rng, n, 0.5, 1.0))
    return params, ratio


def _locking_t_end(params: ModelParams, temps: np.ndarray, ratio: float) -> float:
    t_inf = asymptotic_temperature(temps, params.eta, params.t_star)
    phase_rate = params.kappa1 * params.psi_min * math.sqrt(1 - ratio ** 2) / float(np.max(temps))
    temp_rate = temp_decay_bound(params, float(np.max(temps)))
    return min(200.0, 40.0 / min(phase_rate, temp_rate, 10.0 * sync_rate_bound(params, t_inf)))


def sample_locking(rng: np.random.Generator, index: int = 0, pairing: str = "none") -> Scenario:
    """Heterogeneous balanced frequencies inside the locking framework, margin 0.05 rad."""
    n = int(rng.integers(3, 11))
    seed = _seed(rng)
    temps = RandomInitial((0.0, 0.0), (0.5, 1.5), seed).realize(n).temps
    params, ratio = _locking_params(rng, n, float(np.max(temps)))
    width = math.pi - math.asin(ratio) - 0.05
    centre = rng.uniform(-math.pi, math.pi)
    init = RandomInitial((centre - width / 2, centre + width / 2), (0.5, 1.5), seed)
    claims = ("quarter_circle", "phase_locking_residual") if pairing == "none" else ()
    name = "shadow" if pairing == "kuramoto_shadow" else "locking"
    return Scenario(f"{name}-{index}", params, init, _options(_locking_t_end(params, temps, ratio)),
                    claims, pairing)


def sample_shadow(rng: np.random.Generator, index: int = 0) -> Scenario:
    return sample_locking(rng, index, pairing="kuramoto_shadow")


def sample_twins(rng: np.random.Generator, index: int = 0) -> Scenario:
    n = int(rng.integers(3, 11))
    seed = _seed(rng)
    temps = RandomInitial((0.0, 0.0), (0.5, 1.5), seed).realize(n).temps
    t_inf = asymptotic_temperature(temps, 0.0, 1.0)
    nu = _balanced_nu(rng, n, 0.5, 1.5)
    psi = _sym(rng, n, 0.5, 1.0)
    ratio = rng.uniform(0.2, 0.7)
    kappa1 = (nu.max() - nu.min()) * t_inf / (ratio * psi.min())
    params = ModelParams(kappa1, rng.uniform(1.0, 3.0), 0.0, 1.0, nu, psi, _sym(rng, n, 0.5, 1.0))
    amplitude = rng.uniform(0.05, 0.2)
    width = math.pi - math.asin(ratio) - 0.05 - 2 * amplitude
    centre = rng.uniform(-math.pi, math.pi)
    init = RandomInitial((centre - width / 2, centre + width / 2), (0.5, 1.5), seed)
    rate = params.kappa1 * params.psi_min * math.sqrt(1 - ratio ** 2) / t_inf
    t_end = min(200.0, 30.0 / rate)
    return Scenario(f"twins-{index}", params, init, _options(t_end), (), "twin_l1",
                    Perturbation(amplitude, _seed(rng)))


def sample_tcs(rng: np.random.Generator, index: int = 0) -> Scenario:
    n = int(rng.integers(3, 9))
    params = ModelParams(
        kappa1=rng.uniform(0.5, 2.0), kappa2=rng.uniform(0.5, 2.0), eta=1.0, t_star=1.0,
        nat_freq=np.zeros(n), psi=_sym(rng, n, 0.5, 1.0), zeta=_sym(rng, n, 0.5, 1.0),
    )
    state = TcsState(0.0, rng.uniform(-1, 1, (n, 2)), rng.uniform(-1, 1, (n, 2)), rng.uniform(1.0, 2.0, n))
    return Scenario(f"tcs-{index}", params, state, _options(20.0, n_samples=200), TCS_CLAIMS)


def sample_bipolar(rng: np.random.Generator, index: int = 0) -> Scenario:
    n = int(rng.integers(3, 11))
    params = ModelParams(
        kappa1=rng.uniform(1.0, 2.0), kappa2=rng.uniform(1.0, 3.0), eta=rng.uniform(0.0, 0.5), t_star=1.0,
        nat_freq=np.zeros(n), psi=1.0, zeta=_sym(rng, n, 0.5, 1.0),
    )
    while True:
        init = RandomInitial((-math.pi, math.pi), (0.5, 1.5), _seed(rng))
        if abs(np.mean(np.exp(1j * init.realize(n).phases))) > 0.05:
            break
    return Scenario(f"bipolar-{index}", params, init, _options(200.0),
                    ("order_functional_nondecreasing", "bipolar_classification"))


@dataclass(frozen=True)
class Family:
    name: str
    sampler: Callable[[np.random.Generator, int], Scenario]
    checks: Tuple[str, ...]


FAMILIES: Dict[str, Family] = {
    f.name: f
    for f in (
        Family("thermo", sample_thermo, ("entropy_nondecreasing", "temperature_bounds", "conserved_functional")),
        Family("consensus", sample_consensus, ("temperature_consensus_rate", "asymptotic_temperature")),
        Family("homogeneous", sample_homogeneous,
               ("diameter_contraction", "sync_rate", "order_functional_nondecreasing")),
        Family("locking", sample_locking, ("quarter_circle", "phase_locking_residual")),
        Family("shadow", sample_shadow, ("shadow_spread", "shadow_shift_bound")),
        Family("twins", sample_twins, ("l1_rate", "l1_tail_monotone")),
        Family("tcs", sample_tcs, TCS_CLAIMS),
        Family("bipolar", sample_bipolar, ("order_functional_nondecreasing", "bipolar_classification")),
    )
}

# each claim id maps to the first family that checks it
CLAIM_FAMILY: Dict[str, str] = {}
for _fam in FAMILIES.values():
    for _c in _fam.checks:
        CLAIM_FAMILY.setdefault(_c, _fam.name)


def family_for(claim_or_family: str) -> Family:
    if claim_or_family in FAMILIES:
        return FAMILIES[claim_or_family]
    if claim_or_family in CLAIM_FAMILY:
        return FAMILIES[CLAIM_FAMILY[claim_or_family]]
    known = sorted(set(FAMILIES) | set(CLAIM_FAMILY))
    raise ConfigError(f"unknown claim or family {claim_or_family!r}; known: {', '.join(known)}")


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for trial ``index``; identical to the index-th child of SeedSequence(seed).spawn."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def run_trial(family_name: str, seed: int, index: int) -> Dict[str, Any]:
    fam = FAMILIES[family_name]
    scenario = fam.sampler(trial_rng(seed, index), index)
    record: Dict[str, Any] = {"index": index, "scenario_hash": scenario.hash, "n": scenario.params.n_oscillators}
    try:
        _, report = run_scenario(scenario)
    except InfeasibleError as exc:
        record["error"] = f"infeasible: {exc}"
        record["verdicts"] = {}
        return record
    record["verdicts"] = {v.claim_id: v.to_dict() for v in report.verdicts}
    return record


@dataclass
class MonteCarloReport:
    claim_id: str
    family: str
    n_trials: int
    seed: int
    trials: List[Dict[str, Any]]

    def _summary(self, claim: str) -> Dict[str, Any]:
        vs = [t["verdicts"].get(claim) for t in self.trials]
        present = [v for v in vs if v is not None]
        # a trial that never produced a verdict counts as a failure
        passed = sum(1 for v in present if v["passed"])
        margins = [v["margin"] for v in present if v["margin"] is not None and not math.isnan(v["margin"])]
        return {
            "pass_rate": passed / len(vs) if vs else None,
            "worst_margin": min(margins) if margins else None,
            "failures": [t["index"] for t, v in zip(self.trials, vs) if v is None or not v["passed"]],
        }

    @property
    def pass_rate(self) -> Optional[float]:
        return self._summary(self.claim_id)["pass_rate"]

    @property
    def worst_margin(self) -> Optional[float]:
        return self._summary(self.claim_id)["worst_margin"]

    def claim_summary(self, claim: str) -> Dict[str, Any]:
        return self._summary(claim)

    def to_dict(self) -> Dict[str, Any]:
        checks = FAMILIES[self.family].checks
        return _jsonable({
            "claim_id": self.claim_id,
            "family": self.family,
            "n_trials": self.n_trials,
            "seed": self.seed,
            "pass_rate": self.pass_rate,
            "worst_margin": self.worst_margin,
            "claims": {c: self._summary(c) for c in checks},
            "trials": self.trials,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def monte_carlo(claim_id: str, n_trials: int, seed: int, *, workers: int = 1) -> MonteCarloReport:
    """Sample ``n_trials`` scenarios inside the claim's framework and verify each.

    ``claim_id`` may also name a family, in which case every claim the family
    checks is summarized. Trials are independent and may run in ``workers``
    processes; results are ordered by trial index, so the report does not
    depend on scheduling.
    """
    if n_trials < 0:
        raise ConfigError("n_trials must be nonnegative")
    fam = family_for(claim_id)
    claim = claim_id if claim_id not in FAMILIES else fam.checks[0]
    args = [(fam.name, int(seed), i) for i in range(n_trials)]
    if workers > 1 and n_trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(run_trial, *zip(*args)))
    else:
        trials = [run_trial(*a) for a in args]
    trials.sort(key=lambda t: t["index"])
    return MonteCarloReport(claim, fam.name, n_trials, int(seed), trials)
