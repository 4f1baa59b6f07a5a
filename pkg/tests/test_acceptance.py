"""Acceptance suite: one check per acceptance criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or directly with
``python tests/test_acceptance.py``. Campaign seeds are fixed, so reruns are
byte-for-byte reproducible.
"""

import math
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Tuple

import numpy as np
import pytest

from thermokuramoto.experiments import kuramoto_shadow, monte_carlo
from thermokuramoto.integrator import IntegratorOptions, simulate_tk
from thermokuramoto.io import load_scenario
from thermokuramoto.model import EnsembleState, ModelParams
from thermokuramoto.scenario import Scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

CAMPAIGNS = {
    "thermo": (200, 1001),
    "consensus": (50, 1002),
    "homogeneous": (50, 1003),
    "locking": (50, 1004),
    "shadow": (25, 1005),
    "twins": (25, 1006),
    "tcs": (25, 1007),
    "bipolar": (50, 1008),
}


@lru_cache(maxsize=None)
def campaign(family: str):
    n, seed = CAMPAIGNS[family]
    return monte_carlo(family, n, seed)


def claim_line(family: str, claims: Tuple[str, ...]) -> Tuple[bool, str]:
    rep = campaign(family)
    parts, ok = [], True
    for c in claims:
        s = rep.claim_summary(c)
        ok = ok and s["pass_rate"] == 1.0
        margin = s["worst_margin"]
        parts.append(f"{c} {s['pass_rate']:.0%} of {rep.n_trials} (worst margin {margin:.3g})"
                     + (f" failures {s['failures'][:5]}" if s["failures"] else ""))
    return ok, "; ".join(parts)


def criterion_1():
    return claim_line("thermo", ("entropy_nondecreasing",))


def criterion_2():
    return claim_line("thermo", ("temperature_bounds",))


def criterion_3():
    return claim_line("thermo", ("conserved_functional",))


def criterion_4():
    return claim_line("consensus", ("temperature_consensus_rate", "asymptotic_temperature"))


def criterion_5():
    return claim_line("homogeneous", ("diameter_contraction", "sync_rate"))


def criterion_6():
    t0, k1, d0 = 1.5, 1.2, 2.0
    p = ModelParams.uniform(2, kappa1=k1, kappa2=0.0)
    opts = IntegratorOptions(rel_tol=1e-11, abs_tol=1e-14, t_end=10.0, sample_interval=0.01)
    traj = simulate_tk(p, EnsembleState(0.0, [0.0, d0], [t0, t0]), opts)
    delta = traj.phases[:, 1] - traj.phases[:, 0]
    exact = 2.0 * np.arctan(math.tan(d0 / 2) * np.exp(-(k1 / t0) * traj.times))
    err = float(np.max(np.abs(delta - exact) / np.abs(exact)))
    return err <= 1e-6, f"max relative error {err:.3e} over [0, 10] (limit 1e-6)"


def criterion_7():
    return claim_line("locking", ("quarter_circle",))


def criterion_8():
    return claim_line("locking", ("phase_locking_residual",))


def criterion_9():
    ok, text = claim_line("shadow", ("shadow_spread", "shadow_shift_bound"))
    base = load_scenario(SCENARIO_DIR / "locking.toml")
    uniform = Scenario("uniform", base.params, EnsembleState(0.0, base.initial.phases, np.full(4, 1.1)),
                       base.options, (), "kuramoto_shadow")
    z = kuramoto_shadow(uniform).z
    return ok and abs(z) <= 1e-8, f"{text}; uniform temperatures |z| = {abs(z):.2e} (limit 1e-8)"


def criterion_10():
    return claim_line("twins", ("l1_rate", "l1_tail_monotone"))


def criterion_11():
    return claim_line("tcs", ("momentum_conservation", "energy_conservation", "galilean_invariance"))


def criterion_12():
    ok_h, text_h = claim_line("homogeneous", ("order_functional_nondecreasing",))
    ok_b, text_b = claim_line("bipolar", ("order_functional_nondecreasing", "bipolar_classification"))
    return ok_h and ok_b, f"homogeneous: {text_h}; psi = 1: {text_b}"


CRITERIA: Dict[int, Callable[[], Tuple[bool, str]]] = {
    k: globals()[f"criterion_{k}"] for k in range(1, 13)
}


def report_line(k: int) -> Tuple[bool, str]:
    ok, detail = CRITERIA[k]()
    return ok, f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k, capsys):
    ok, line = report_line(k)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def main() -> int:
    lines: List[str] = []
    failed = 0
    for k in sorted(CRITERIA):
        ok, line = report_line(k)
        print(line, flush=True)
        failed += not ok
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
