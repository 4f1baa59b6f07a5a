"""Phase-locked equilibria, bipolar classification, and the average-phase shift bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConvergenceError, DomainError, InfeasibleError
from .model import FloatArray, ModelParams, asymptotic_temperature, coupling_sums


@dataclass(frozen=True, eq=False)
class PhaseLockedState:
    phases: FloatArray
    t_infinity: float
    residual: float
    phase_sum: float
    balanced: bool
    iterations: int = 0


def balance_defect(params: ModelParams) -> float:
    """|Σν_α|, which must vanish for bounded (non-drifting) phases."""
    return abs(float(np.sum(params.nat_freq)))


def is_balanced(params: ModelParams, rtol: float = 1e-12) -> bool:
    return balance_defect(params) <= rtol * (1.0 + float(np.sum(np.abs(params.nat_freq))))


def locking_residuals(phases: ArrayLike, params: ModelParams, t_infinity: float) -> FloatArray:
    """ν_α + κ₁/(N T∞) Σ_β ψ_αβ sin(θ_β − θ_α) for every α."""
    phases = np.asarray(phases, dtype=np.float64)
    n = phases.size
    return params.nat_freq + params.kappa1 / (n * t_infinity) * coupling_sums(phases, params.psi)


def _augmented(theta: FloatArray, params: ModelParams, t_inf: float, phase_sum: float):
    n = theta.size
    c = params.kappa1 / (n * t_inf)
    diff = theta[np.newaxis, :] - theta[:, np.newaxis]
    f = params.nat_freq + c * np.sum(params.psi * np.sin(diff), axis=1)
    jac = c * params.psi * np.cos(diff)
    np.fill_diagonal(jac, 0.0)
    np.fill_diagonal(jac, -jac.sum(axis=1))
    # the N equations sum to Σν = 0, so one is redundant: swap it for the sum constraint
    g = f.copy()
    g[-1] = theta.sum() - phase_sum
    jac[-1, :] = 1.0
    return f, g, jac


def solve_phase_locked(
    params: ModelParams,
    t_infinity: float,
    phase_sum: float,
    initial_guess: ArrayLike,
    *,
    tol: float = 1e-12,
    max_iter: int = 500,
    max_halvings: int = 60,
    globalization: str = "continuation",
) -> PhaseLockedState:
    """Damped Newton solve of the phase-locking equations with Σθ fixed.

    One of the N equations is redundant (they sum to Σν = 0) and is swapped
    for the sum constraint. Two globalizations are offered:

    ``"continuation"`` (default) solves (I/Δτ − J)δ = f with a pseudo-time
    step Δτ that grows as the residual falls, so early iterates follow the
    Kuramoto flow from the guess and late ones are plain Newton steps. It
    lands on the equilibrium the flow selects, e.g. the coherent state for a
    half-circle guess with identical frequencies. Steps are halved only when
    they produce non-finite values.

    ``"backtracking"`` takes full Newton steps halved until the residual
    norm decreases. It converges fast but, with ψ ≡ 1, is often drawn to the
    continuum of balanced (R = 0) equilibria.

    Either way a :class:`ConvergenceError` carrying the last iterate is
    raised when ``max_iter`` steps or ``max_halvings`` halvings are exhausted.
    """
    if globalization not in ("continuation", "backtracking"):
        raise ValueError(f"unknown globalization {globalization!r}")
    if not t_infinity > 0:
        raise DomainError(f"t_infinity must be positive, got {t_infinity}")
    if not is_balanced(params):
        raise InfeasibleError(f"natural frequencies must sum to zero (sum = {np.sum(params.nat_freq):.3e})")
    theta = np.array(initial_guess, dtype=np.float64).ravel()
    n = theta.size
    if n != params.n_oscillators:
        raise DomainError(f"initial guess has {n} entries, expected {params.n_oscillators}")
    continuation = globalization == "continuation"
    sum_scale = 1.0 + abs(phase_sum)
    f, g, jac = _augmented(theta, params, t_infinity, phase_sum)
    norm = float(np.linalg.norm(g))
    stiff = float(np.max(np.abs(np.diag(jac)[:-1]))) if n > 1 else 0.0
    dtau = 0.1 / stiff if stiff > 0 else math.inf
    shift = np.eye(n)
    shift[-1, -1] = 0.0
    for it in range(max_iter + 1):
        if np.max(np.abs(f)) <= tol and abs(g[-1]) <= tol * sum_scale:
            residual = float(np.max(np.abs(locking_residuals(theta, params, t_infinity))))
            return PhaseLockedState(theta, t_infinity, residual, float(theta.sum()), True, it)
        if it == max_iter:
            break
        mat = jac - shift / dtau if continuation else jac
        try:
            step = np.linalg.solve(mat, -g)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}", theta, norm) from None
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = theta + lam * step
            f_t, g_t, jac_t = _augmented(trial, params, t_infinity, phase_sum)
            norm_t = float(np.linalg.norm(g_t))
            if math.isfinite(norm_t) and (continuation or norm_t < norm):
                break
            lam *= 0.5
        else:
            raise ConvergenceError("line search stagnated", theta, norm)
        if continuation:
            # switched evolution relaxation: grow Δτ as the residual shrinks
            dtau *= min(1e3, norm / max(norm_t, 1e-300))
        theta, f, g, jac, norm = trial, f_t, g_t, jac_t, norm_t
    raise ConvergenceError(f"no convergence in {max_iter} steps", theta, norm)


@dataclass(frozen=True)
class BipolarClassification:
    """``kind`` is "coherent", "bipolar" or "other".

    ``groups`` holds the 0-based indices at φ∞ and at φ∞ + π.
    """

    kind: str
    phi_infinity: Optional[float]
    groups: Tuple[Tuple[int, ...], Tuple[int, ...]] = ((), ())
    max_deviation: float = float("nan")


def _wrap(x):
    return np.mod(x + np.pi, 2.0 * np.pi) - np.pi


def classify_bipolar(phases: ArrayLike, angle_tol: float = 1e-6) -> BipolarClassification:
    phases = np.asarray(phases, dtype=np.float64).ravel()
    # the doubled-angle mean is blind to the φ / φ+π split
    z2 = np.mean(np.exp(2j * phases))
    axis = 0.5 * float(np.angle(z2)) if abs(z2) > 1e-12 else float(phases[0])
    dev = _wrap(phases - axis)
    near = np.abs(dev) <= 0.5 * np.pi
    group_a = np.flatnonzero(near)
    group_b = np.flatnonzero(~near)
    if group_b.size > group_a.size:
        axis = float(_wrap(np.array(axis + np.pi)))
        group_a, group_b = group_b, group_a
    ref_a = axis
    dev_a = np.abs(_wrap(phases[group_a] - ref_a))
    dev_b = np.abs(_wrap(phases[group_b] - ref_a - np.pi))
    max_dev = float(max(dev_a.max(initial=0.0), dev_b.max(initial=0.0)))
    if max_dev > angle_tol:
        return BipolarClassification("other", None, max_deviation=max_dev)
    groups = (tuple(int(i) for i in group_a), tuple(int(i) for i in group_b))
    kind = "coherent" if group_b.size == 0 else "bipolar"
    return BipolarClassification(kind, ref_a, groups, max_dev)


def shift_bound(params: ModelParams, temps_in: ArrayLike) -> float:
    """Upper bound on how far the TK average phase drifts from its initial value."""
    temps = np.sort(np.asarray(temps_in, dtype=np.float64).ravel())
    if not temps[0] > 0:
        raise DomainError("initial temperatures must be positive", index=0)
    t_lo, t_hi = float(temps[0]), float(temps[-1])
    t_inf = asymptotic_temperature(temps, params.eta, params.t_star)
    ts2 = params.t_star ** 2
    if t_hi == t_lo:
        return 0.0
    if params.kappa2 == 0 or params.zeta_min == 0:
        return math.inf
    return (
        params.kappa1 * params.psi_max / (params.kappa2 * params.zeta_min)
        * t_hi ** 2 * (ts2 + params.eta ** 2 * t_hi) * (t_hi - t_lo)
        / (ts2 * t_inf * t_lo)
    )
