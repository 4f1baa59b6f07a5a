import json
import math
from pathlib import Path

import numpy as np
import pytest

from thermokuramoto.analysis import CLAIMS
from thermokuramoto.errors import ConfigError, DomainError, InfeasibleError
from thermokuramoto.experiments import (
    FAMILIES,
    galilean_discrepancy,
    kuramoto_shadow,
    monte_carlo,
    run_scenario,
    tcs_reduction,
    trial_rng,
    twin_l1,
)
from thermokuramoto.integrator import IntegratorOptions
from thermokuramoto.io import load_scenario
from thermokuramoto.model import EnsembleState, ModelParams
from thermokuramoto.scenario import Perturbation, RandomInitial, Scenario
from thermokuramoto.tcs import TcsState

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

HOMOGENEOUS_CLAIMS = (
    "entropy_nondecreasing", "temperature_bounds", "conserved_functional", "diameter_contraction",
    "sync_rate", "order_functional_nondecreasing", "temperature_consensus_rate", "asymptotic_temperature",
)


def fine(t_end, dt=0.1, rel_tol=1e-10):
    return IntegratorOptions(t_end=t_end, rel_tol=rel_tol, abs_tol=1e-13, sample_interval=dt)


def shadow_scenario(kappa2=3.0, temps=(0.8, 1.0, 1.2, 1.4), t_end=60.0):
    base = load_scenario(SCENARIO_DIR / "locking.toml")
    params = base.params.replace(kappa2=kappa2)
    init = EnsembleState(0.0, base.initial.phases, np.array(temps))
    return Scenario("shadow", params, init, fine(t_end, 0.15, 1e-11), (), "kuramoto_shadow")


class TestRunScenario:
    def test_homogeneous_example_passes_every_claim(self):
        p = ModelParams.uniform(10, kappa1=1.0, kappa2=1.0)
        init = RandomInitial((-math.pi / 2 + 0.1, math.pi / 2 - 0.1), (1.0, 2.0), seed=2024)
        s = Scenario("homog", p, init, fine(80.0, 0.2), HOMOGENEOUS_CLAIMS)
        _, report = run_scenario(s)
        assert len(report.verdicts) == len(HOMOGENEOUS_CLAIMS)
        for v in report.verdicts:
            assert v.passed, v
        assert report.seed == 2024 and report.scenario_hash == s.hash

    def test_unbalanced_frequencies_infeasible_before_integration(self):
        p = ModelParams.uniform(3, nat_freq=[0.1, 0.2, 0.3])
        s = Scenario("bad", p, EnsembleState(0.0, np.zeros(3), np.ones(3)), fine(5.0), ("quarter_circle",))
        with pytest.raises(InfeasibleError, match="balance"):
            run_scenario(s)

    def test_wide_initial_diameter_infeasible(self):
        p = ModelParams.uniform(3, kappa2=1.0)
        s = Scenario("wide", p, EnsembleState(0.0, np.array([0.0, 1.0, 3.2]), np.ones(3)), fine(5.0),
                     ("diameter_contraction",))
        with pytest.raises(InfeasibleError, match="half circle"):
            run_scenario(s)

    def test_tcs_claims_need_tcs_state(self):
        p = ModelParams.uniform(2)
        with pytest.raises(ConfigError):
            run_scenario(Scenario("x", p, EnsembleState(0.0, np.zeros(2), np.ones(2)), fine(1.0),
                                  ("momentum_conservation",)))

    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.toml")), ids=lambda p: p.stem)
    def test_bundled_scenarios_pass(self, path):
        _, report = run_scenario(load_scenario(path))
        assert report.passed, [v for v in report.verdicts if not v.passed]
        json.loads(report.to_json())


class TestShadow:
    def test_uniform_temperatures_give_no_shift(self):
        rep = kuramoto_shadow(shadow_scenario(temps=(1.1, 1.1, 1.1, 1.1)))
        assert abs(rep.z) < 1e-8 and rep.spread < 1e-8 and rep.converged

    def test_shift_within_bound(self):
        rep = kuramoto_shadow(shadow_scenario())
        assert rep.converged and all(v.passed for v in rep.verdicts)
        assert abs(rep.z) <= rep.bound

    def test_shift_shrinks_with_faster_temperature_relaxation(self):
        zs = [abs(kuramoto_shadow(shadow_scenario(kappa2=k)).z) for k in (0.5, 1.0, 2.0, 4.0, 8.0)]
        assert all(a > b for a, b in zip(zs, zs[1:])), zs

    def test_inconclusive_when_not_converged(self):
        rep = kuramoto_shadow(shadow_scenario(t_end=3.0))
        assert not rep.converged
        assert all(not v.passed and "inconclusive" in v.notes for v in rep.verdicts)


class TestTwins:
    def base(self):
        return load_scenario(SCENARIO_DIR / "twins.toml")

    def test_identical_twins(self):
        rep = twin_l1(self.base(), Perturbation(offsets=(0.0,) * 6))
        assert np.all(rep.distance == 0.0)
        assert rep.initial_distance == 0.0 and all(v.passed for v in rep.verdicts)

    def test_sum_mismatch_rejected(self):
        with pytest.raises(DomainError, match="sum"):
            twin_l1(self.base(), Perturbation(offsets=(0.1, 0, 0, 0, 0, 0)))

    def test_contraction_and_rate(self):
        rep = twin_l1(self.base())
        assert rep.distance[-1] < 1e-3 * rep.distance[0]
        assert rep.rate >= rep.bound > 0


class TestReduction:
    def reduction_scenario(self, phases, temps, t_end=5.0):
        p = ModelParams.uniform(len(phases), kappa1=1.0, kappa2=1.0, eta=0.5, t_star=1.0)
        return Scenario("red", p, EnsembleState(0.0, np.asarray(phases, float), np.asarray(temps, float)),
                        fine(t_end, 0.1))

    def test_requires_zero_frequencies(self):
        s = self.reduction_scenario([0.0, 0.1], [1.0, 1.0])
        s = Scenario("red", s.params.replace(nat_freq=np.array([0.1, -0.1])), s.initial, s.options)
        with pytest.raises(InfeasibleError):
            tcs_reduction(s)

    def test_equilibrium_has_no_deviation(self):
        rep = tcs_reduction(self.reduction_scenario([0.3, 0.3, 0.3], [1.2, 1.2, 1.2]))
        assert rep.max_phase_deviation < 1e-12
        assert rep.max_temp_deviation < 1e-12
        assert np.max(rep.ansatz_residual) < 1e-12

    def test_findings_are_reported(self):
        rep = tcs_reduction(self.reduction_scenario([0.0, 0.4, 0.9], [0.8, 1.0, 1.3]))
        f = rep.findings()
        assert f["times"].shape == f["phase_deviation"].shape
        assert rep.phase_deviation[0] < 1e-12 and rep.temp_deviation[0] < 1e-12
        assert f["galilean_discrepancy"] < 1e-6

    def test_galilean_invariance(self):
        p = ModelParams.uniform(3, kappa1=1.0, kappa2=1.0, eta=0.5)
        rng = np.random.default_rng(4)
        state = TcsState(0.0, rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), rng.uniform(1, 2, 3))
        assert galilean_discrepancy(p, state, fine(3.0, 0.1, 1e-11)) < 1e-6


class TestMonteCarlo:
    def test_zero_trials(self):
        rep = monte_carlo("entropy_nondecreasing", 0, 1)
        assert rep.n_trials == 0 and rep.trials == [] and rep.pass_rate is None

    def test_byte_identical_for_fixed_seed(self):
        a = monte_carlo("thermo", 2, 99).to_json()
        b = monte_carlo("thermo", 2, 99).to_json()
        assert a == b

    def test_seed_changes_trials(self):
        a = monte_carlo("thermo", 1, 1).to_dict()["trials"][0]["scenario_hash"]
        b = monte_carlo("thermo", 1, 2).to_dict()["trials"][0]["scenario_hash"]
        assert a != b

    def test_trial_streams_match_spawned_children(self):
        child = np.random.SeedSequence(5).spawn(3)[2]
        assert trial_rng(5, 2).random() == np.random.default_rng(child).random()

    def test_unknown_claim(self):
        with pytest.raises(ConfigError):
            monte_carlo("not_a_claim", 1, 0)

    def test_every_claim_has_a_family(self):
        checked = {c for f in FAMILIES.values() for c in f.checks}
        assert set(CLAIMS) - {"phase_sum_convergence"} <= checked

    @pytest.mark.parametrize("family", sorted(FAMILIES))
    def test_samplers_stay_in_framework(self, family):
        fam = FAMILIES[family]
        for i in range(2):
            s = fam.sampler(trial_rng(123, i), i)
            assert set(fam.checks) & (set(s.claims) | {"shadow_spread", "shadow_shift_bound", "l1_rate",
                                                         "l1_tail_monotone"})
            _, report = run_scenario(s)
            for v in report.verdicts:
                assert v.passed, (family, i, v)
