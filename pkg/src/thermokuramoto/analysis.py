"""
Closed-form rate/diameter bounds, decay-rate fitting, and per-claim verdicts
computed from sampled trajectories.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigError, DomainError, FitError
from .equilibrium import classify_bipolar, locking_residuals
from .integrator import Trajectory
from .model import FloatArray, ModelParams, asymptotic_temperature

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-9
DEFAULT_FLOOR = 1e-12
RATE_FACTOR = 0.9
TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class DecayFit:
    rate: float
    window: Tuple[float, float]
    r_squared: float
    floor_reached: bool
    n_points: int = 0


@dataclass(frozen=True)
class ClaimVerdict:
    """Outcome of one claim check.

    ``comparison`` is "le" (pass iff measured ≤ bound + tolerance) or "ge"
    (pass iff measured ≥ bound − tolerance); ``margin`` is positive on the
    passing side.
    """

    claim_id: str
    measured: float
    bound: float
    tolerance: float
    passed: bool
    notes: str = ""
    comparison: str = "le"

    @property
    def margin(self) -> float:
        if self.comparison == "le":
            return self.bound + self.tolerance - self.measured
        return self.measured - (self.bound - self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["margin"] = self.margin
        return d


def _verdict(claim_id: str, measured: float, bound: float, tolerance: float, comparison: str = "le",
             notes: str = "") -> ClaimVerdict:
    if comparison == "le":
        ok = measured <= bound + tolerance
    else:
        ok = measured >= bound - tolerance
    ok = ok and math.isfinite(measured)
    return ClaimVerdict(claim_id, float(measured), float(bound), float(tolerance), bool(ok), notes, comparison)


# -- closed-form bounds -----------------------------------------------------------


def temp_decay_bound(params: ModelParams, t_infinity: float) -> float:
    """Supremum of admissible temperature-consensus rates, κ₂ζ_min T*² / (T∞²(T*² + η²T∞))."""
    ts2 = params.t_star ** 2
    return params.kappa2 * params.zeta_min * ts2 / (t_infinity ** 2 * (ts2 + params.eta ** 2 * t_infinity))


def sync_rate_bound(params: ModelParams, t_infinity: float) -> float:
    """Supremum of admissible phase-synchronization rates, κ₁ψ_min / T∞."""
    if params.psi_min == 0:
        logger.warning("psi_min = 0: synchronization rate bound is degenerate")
    return params.kappa1 * params.psi_min / t_infinity


def practical_sync_bound(d_nu: float, t_ref: float, params: ModelParams) -> Optional[float]:
    """arcsin(D(ν) t_ref / (κ₁ψ_min)), or None when the argument is not below 1."""
    if params.psi_min == 0:
        return None if d_nu > 0 else 0.0
    arg = d_nu * t_ref / (params.kappa1 * params.psi_min)
    if arg >= 1.0:
        return None
    return math.asin(arg)


def l1_distance(phases_a: ArrayLike, phases_b: ArrayLike) -> float | FloatArray:
    a = np.asarray(phases_a, dtype=np.float64)
    b = np.asarray(phases_b, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.sum(np.abs(a - b), axis=-1)


def l1_stability_rate_bound(params: ModelParams, t_infinity: float, d_inf: float) -> float:
    """(κ₁ψ_min/T∞) · sin(2D∞)/(2D∞), the ℓ¹ contraction rate for diameters below D∞."""
    if not 0 < d_inf <= math.pi / 2:
        raise DomainError(f"d_inf must lie in (0, pi/2], got {d_inf}")
    return params.kappa1 * params.psi_min / t_infinity * math.sin(2 * d_inf) / (2 * d_inf)


# -- fitting -------------------------------------------------------------------------


def fit_decay(
    times: ArrayLike,
    values: ArrayLike,
    window_fraction: float = 0.5,
    floor: float = DEFAULT_FLOOR,
    min_points: int = 10,
) -> DecayFit:
    """Exponential rate from a least-squares line through ln(value).

    Only samples above ``floor`` are used (below it the series is round-off),
    and of those the trailing ``window_fraction``. ``rate`` is minus the slope.
    """
    t = np.asarray(times, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if not 0 < window_fraction <= 1:
        raise ValueError(f"window_fraction must lie in (0, 1], got {window_fraction}")
    above = np.flatnonzero(v > floor)
    floor_reached = bool(above.size < v.size)
    if above.size:
        # the usable series ends at the first sample that touches the floor
        lows_after = np.flatnonzero(v <= floor)
        lows_after = lows_after[lows_after > above[0]]
        if lows_after.size:
            above = above[above < lows_after[0]]
    n_window = int(math.ceil(window_fraction * above.size))
    if n_window < min_points:
        raise FitError(
            f"only {n_window} samples above floor {floor:g} in the fit window (need {min_points})",
            floor_reached=True,
        )
    idx = above[-n_window:]
    tw, lv = t[idx], np.log(v[idx])
    if np.all(lv == lv[0]):
        slope, intercept = 0.0, float(lv[0])
    else:
        slope, intercept = np.polyfit(tw, lv, 1)
    pred = slope * tw + intercept
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    ss_res = float(np.sum((lv - pred) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    rate = -float(slope) + 0.0
    return DecayFit(rate, (float(tw[0]), float(tw[-1])), r2, floor_reached, int(idx.size))


# -- monotonicity helpers ------------------------------------------------------------


def monotone_violation(values: ArrayLike, increasing: bool = True) -> float:
    """Largest step against the expected direction, relative to 1 + |value|.

    Zero for a perfectly monotone series; compare against the slack 1e-9.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    step = np.diff(v)
    against = -step if increasing else step
    return float(max(0.0, np.max(against / (1.0 + np.abs(v[:-1])))))


def tail_slice(n_samples: int, fraction: float = TAIL_FRACTION) -> slice:
    k = max(2, int(math.ceil(fraction * n_samples)))
    return slice(max(0, n_samples - k), n_samples)


def tail_variation(series: ArrayLike, fraction: float = TAIL_FRACTION) -> float:
    """Max over components of (max − min) across the trailing fraction of samples."""
    s = np.asarray(series, dtype=np.float64)
    tail = s[tail_slice(s.shape[0], fraction)]
    spread = tail.max(axis=0) - tail.min(axis=0)
    return float(np.max(spread))


# -- trajectory verification -----------------------------------------------------------


CLAIMS = (
    "entropy_nondecreasing",
    "temperature_bounds",
    "conserved_functional",
    "diameter_contraction",
    "quarter_circle",
    "phase_sum_convergence",
    "order_functional_nondecreasing",
    "temperature_consensus_rate",
    "sync_rate",
    "asymptotic_temperature",
    "phase_locking_residual",
    "bipolar_classification",
)

TCS_CLAIMS = (
    "momentum_conservation",
    "energy_conservation",
    "tcs_entropy_nondecreasing",
    "galilean_invariance",
)

DEFAULT_TOLERANCES: Dict[str, float] = {
    "monotone_slack": MONOTONE_SLACK,
    "conservation": 1e-6,
    "quarter_circle": 1e-3,
    "phase_sum_tail": 1e-6,
    "rate_factor": RATE_FACTOR,
    "fit_floor": 1e-9,
    "fit_window": 0.5,
    "asymptotic_temperature": 1e-8,
    "locking_residual": 1e-6,
    "convergence_certificate": 1e-8,
    "angle_tol": 1e-4,
    "tcs_conservation": 1e-8,
    "galilean": 1e-6,
}


def _pairwise_cos_functional(phases: FloatArray, psi: FloatArray) -> FloatArray:
    c, s = np.cos(phases), np.sin(phases)
    # Σ ψ_ab cos(θa−θb) = cᵀψc + sᵀψs, evaluated per sample
    return np.einsum("ka,ab,kb->k", c, psi, c) + np.einsum("ka,ab,kb->k", s, psi, s)


def _homogeneous(params: ModelParams) -> bool:
    return params.nu_diameter == 0.0


def verify_trajectory(
    traj: Trajectory,
    params: ModelParams,
    claims: Iterable[str],
    tolerances: Optional[Mapping[str, float]] = None,
) -> List[ClaimVerdict]:
    """Check each requested claim against a TK (or Kuramoto) trajectory.

    Verdicts are deterministic threshold checks; claims whose hypotheses the
    trajectory does not meet fail with an explanatory note.
    """
    claims = list(claims)
    unknown = [c for c in claims if c not in CLAIMS]
    if unknown:
        raise ConfigError(f"unknown claim id(s): {', '.join(unknown)}; known: {', '.join(CLAIMS)}")
    if len(traj) < 100:
        raise ConfigError(f"trajectory has {len(traj)} samples; at least 100 are needed for verification")
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        tol.update(tolerances)
    slack = tol["monotone_slack"]
    obs = traj.observables
    times, phases, temps = traj.times, traj.phases, traj.temps
    t_inf = asymptotic_temperature(temps[0], params.eta, params.t_star)
    out: List[ClaimVerdict] = []

    for claim in claims:
        if claim == "entropy_nondecreasing":
            out.append(_verdict(claim, monotone_violation(obs["entropy"]), 0.0, slack))
        elif claim == "temperature_bounds":
            v = max(
                monotone_violation(temps.min(axis=1), increasing=True),
                monotone_violation(temps.max(axis=1), increasing=False),
            )
            out.append(_verdict(claim, v, 0.0, slack, notes="min nondecreasing, max nonincreasing"))
        elif claim == "conserved_functional":
            g = obs["conserved_g"]
            drift = float(np.max(np.abs(g - g[0])) / abs(g[0]))
            out.append(_verdict(claim, drift, 0.0, tol["conservation"], notes="relative drift"))
        elif claim == "diameter_contraction":
            d = obs["phase_diameter"]
            notes = ""
            if not (_homogeneous(params) and d[0] < math.pi):
                notes = "framework not met: needs identical natural frequencies and D(theta_in) < pi"
            excess = float(np.max((d - d[0]) / (1.0 + d[0])))
            v = _verdict(claim, max(0.0, excess), 0.0, slack, notes=notes)
            out.append(v if not notes else ClaimVerdict(**{**asdict(v), "passed": False}))
        elif claim == "quarter_circle":
            bound = practical_sync_bound(params.nu_diameter, t_inf, params)
            tail_max = float(np.max(obs["phase_diameter"][tail_slice(len(traj))]))
            if bound is None:
                out.append(ClaimVerdict(claim, tail_max, math.nan, tol["quarter_circle"], False,
                                        "infeasible: D(nu)*T_inf/(kappa1*psi_min) >= 1"))
            else:
                out.append(_verdict(claim, tail_max, bound, tol["quarter_circle"], notes="tail max of D(theta)"))
        elif claim == "phase_sum_convergence":
            q = obs["phase_sum"] - times * float(np.sum(params.nat_freq))
            var = tail_variation(q[:, np.newaxis])
            out.append(_verdict(claim, var, 0.0, tol["phase_sum_tail"] * (1.0 + abs(q[-1])),
                                notes="tail variation of sum(theta) - t*sum(nu)"))
        elif claim == "order_functional_nondecreasing":
            f = _pairwise_cos_functional(phases, params.psi)
            notes = "" if _homogeneous(params) else "framework not met: needs identical natural frequencies"
            v = _verdict(claim, monotone_violation(f), 0.0, slack, notes=notes)
            out.append(v if not notes else ClaimVerdict(**{**asdict(v), "passed": False}))
        elif claim == "temperature_consensus_rate":
            out.append(_rate_verdict(claim, times, obs["temp_diameter"], temp_decay_bound(params, t_inf), tol))
        elif claim == "sync_rate":
            out.append(_rate_verdict(claim, times, obs["phase_diameter"], sync_rate_bound(params, t_inf), tol))
        elif claim == "asymptotic_temperature":
            err = float(np.max(np.abs(temps[-1] - t_inf)))
            out.append(_verdict(claim, err, 0.0, tol["asymptotic_temperature"],
                                notes=f"T_inf={t_inf:.15g}"))
        elif claim == "phase_locking_residual":
            var = tail_variation(phases)
            res = float(np.max(np.abs(locking_residuals(phases[-1], params, t_inf))))
            if var >= tol["convergence_certificate"]:
                out.append(ClaimVerdict(claim, res, 0.0, tol["locking_residual"], False,
                                        f"not converged: tail variation {var:.3e}"))
            else:
                out.append(_verdict(claim, res, 0.0, tol["locking_residual"],
                                    notes=f"tail variation {var:.3e}"))
        elif claim == "bipolar_classification":
            cls = classify_bipolar(phases[-1], angle_tol=tol["angle_tol"])
            ok = cls.kind in ("coherent", "bipolar")
            notes = f"kind={cls.kind}"
            if not (_homogeneous(params) and params.psi_min == params.psi_max):
                ok, notes = False, notes + "; framework not met: needs identical frequencies and constant psi"
            out.append(ClaimVerdict(claim, cls.max_deviation, 0.0, tol["angle_tol"], ok, notes))
    return out


def verify_tcs_trajectory(
    traj: Trajectory,
    claims: Iterable[str],
    tolerances: Optional[Mapping[str, float]] = None,
) -> List[ClaimVerdict]:
    """Conservation and entropy checks on a TCS trajectory.

    Momentum drift is measured relative to the initial total speed Σ|v_α|,
    which stays meaningful when the total momentum itself is zero.
    ``galilean_invariance`` needs a second run and is handled by the caller.
    """
    claims = [c for c in claims if c != "galilean_invariance"]
    unknown = [c for c in claims if c not in TCS_CLAIMS]
    if unknown:
        raise ConfigError(f"unknown TCS claim id(s): {', '.join(unknown)}")
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        tol.update(tolerances)
    v, temps = traj.velocities, traj.temps
    out: List[ClaimVerdict] = []
    for claim in claims:
        if claim == "momentum_conservation":
            p = v.sum(axis=1)
            scale = float(np.sum(np.hypot(v[0, :, 0], v[0, :, 1]))) or 1.0
            drift = float(np.max(np.abs(p - p[0]))) / scale
            out.append(_verdict(claim, drift, 0.0, tol["tcs_conservation"], notes="relative to initial total speed"))
        elif claim == "energy_conservation":
            e = temps.sum(axis=1) + 0.5 * np.sum(v ** 2, axis=(1, 2))
            drift = float(np.max(np.abs(e - e[0])) / abs(e[0]))
            out.append(_verdict(claim, drift, 0.0, tol["tcs_conservation"], notes="relative drift"))
        elif claim == "tcs_entropy_nondecreasing":
            s = np.sum(np.log(temps), axis=1)
            out.append(_verdict(claim, monotone_violation(s), 0.0, tol["monotone_slack"]))
    return out


def _rate_verdict(claim: str, times, series, bound: float, tol: Mapping[str, float]) -> ClaimVerdict:
    factor = tol["rate_factor"]
    try:
        fit = fit_decay(times, series, window_fraction=tol["fit_window"], floor=tol["fit_floor"])
    except FitError as exc:
        return ClaimVerdict(claim, math.nan, factor * bound, 0.0, False, f"fit failed: {exc}", "ge")
    return _verdict(claim, fit.rate, factor * bound, 0.0, "ge",
                    notes=f"fit window [{fit.window[0]:.4g}, {fit.window[1]:.4g}], r2={fit.r_squared:.6f}, "
                          f"bound={bound:.6g}")
