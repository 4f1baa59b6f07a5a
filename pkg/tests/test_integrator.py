import math

import numpy as np
import pytest

from conftest import random_params, random_state
from thermokuramoto.errors import DomainError, IntegrationError
from thermokuramoto.integrator import (
    IntegratorOptions,
    default_dt,
    empty_trajectory,
    integrate,
    simulate_kuramoto,
    simulate_tk,
    tk_field,
)
from thermokuramoto.model import EnsembleState, ModelParams


def two_oscillator_exact(delta0, rate, t):
    return 2 * np.arctan(math.tan(delta0 / 2) * np.exp(-rate * t))


class TestOptions:
    @pytest.mark.parametrize("kw", [{"dt": 0}, {"rel_tol": 0}, {"t_end": -1}, {"method": "euler"},
                                    {"output_stride": 0}, {"positivity_floor": 0}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            IntegratorOptions(**kw)

    def test_default_dt_heuristic(self):
        p = ModelParams.uniform(3, kappa1=2.0, kappa2=4.0)
        assert default_dt(p, np.array([0.5, 1, 2])) == pytest.approx(0.01 * min(0.5 / 2, 0.25 / 4))


class TestTwoOscillator:
    @pytest.mark.parametrize("method", ["rk4_fixed", "rk45_adaptive"])
    def test_closed_form(self, method):
        t0, k1, d0 = 1.5, 1.2, 2.0
        p = ModelParams.uniform(2, kappa1=k1, kappa2=0.0)
        opts = IntegratorOptions(method=method, dt=1e-3, rel_tol=1e-11, abs_tol=1e-14, t_end=10.0,
                                 output_stride=50)
        traj = simulate_tk(p, EnsembleState(0, [0, d0], [t0, t0]), opts)
        delta = traj.phases[:, 1] - traj.phases[:, 0]
        exact = two_oscillator_exact(d0, k1 / t0, traj.times)
        assert np.max(np.abs(delta - exact) / np.abs(exact)) < 1e-6


class TestBehaviour:
    def test_equilibrium_constant(self):
        p = ModelParams.uniform(4, eta=0.5)
        traj = simulate_tk(p, EnsembleState(0, [0.2] * 4, [1.1] * 4), IntegratorOptions(t_end=5))
        assert np.all(traj.values == traj.values[0])

    def test_sample_grid_and_times(self):
        p = random_params(2, 4)
        traj = simulate_tk(p, random_state(2, 4), IntegratorOptions(t_end=3.0, sample_interval=0.25))
        np.testing.assert_allclose(traj.times, np.arange(13) * 0.25, atol=1e-12)
        assert np.all(np.diff(traj.times) > 0)
        assert traj.times[-1] == 3.0

    def test_temperature_envelope_and_positivity(self):
        p = random_params(5, 6)
        traj = simulate_tk(p, random_state(5, 6), IntegratorOptions(t_end=10, rel_tol=1e-10, abs_tol=1e-13))
        tmin, tmax = traj.temps.min(axis=1), traj.temps.max(axis=1)
        assert np.all(np.diff(tmin) >= -1e-10) and np.all(np.diff(tmax) <= 1e-10)
        assert np.all(traj.temps > 0)

    def test_conserved_g_drift(self):
        p = random_params(9, 7)
        traj = simulate_tk(p, random_state(9, 7), IntegratorOptions(t_end=20, rel_tol=1e-10, abs_tol=1e-13))
        g = traj.observables["conserved_g"]
        assert np.max(np.abs(g - g[0])) <= 1e-8 * g[0]

    def test_kuramoto_keeps_phase_sum(self):
        p = random_params(3, 5)
        traj = simulate_kuramoto(p, random_state(3, 5).phases, 1.4, IntegratorOptions(t_end=10))
        s = traj.phases.sum(axis=1) - traj.times * p.nat_freq.sum()
        assert np.max(np.abs(s - s[0])) < 1e-8
        assert np.all(traj.temps == 1.4)

    def test_rk4_order(self):
        p = random_params(11, 4)
        s = random_state(11, 4, temp_range=(0.5, 2.0))
        ref = simulate_tk(p, s, IntegratorOptions(t_end=2.0, rel_tol=1e-13, abs_tol=1e-15, sample_interval=2.0))
        errs = []
        for dt in (0.04, 0.02):
            opts = IntegratorOptions(method="rk4_fixed", dt=dt, t_end=2.0, output_stride=int(round(2.0 / dt)))
            errs.append(np.max(np.abs(simulate_tk(p, s, opts).values[-1] - ref.values[-1])))
        assert 12.0 < errs[0] / errs[1] < 20.0

    def test_rk4_positivity_abort(self):
        p = ModelParams.uniform(2, kappa2=50.0)
        opts = IntegratorOptions(method="rk4_fixed", dt=0.5, t_end=2.0, output_stride=1)
        with pytest.raises(IntegrationError) as exc:
            simulate_tk(p, EnsembleState(0, [0, 0], [0.05, 5.0]), opts)
        assert isinstance(exc.value.last_state, EnsembleState)

    def test_adaptive_survives_large_initial_step(self):
        p = ModelParams.uniform(2, kappa2=50.0)
        opts = IntegratorOptions(dt=0.5, t_end=2.0, rel_tol=1e-8)
        traj = simulate_tk(p, EnsembleState(0, [0, 0], [0.05, 5.0]), opts)
        assert np.all(traj.temps > 0)
        assert traj.stats["positivity_rejected"] + traj.stats["rejected"] > 0

    def test_initial_below_floor(self):
        p = ModelParams.uniform(2)
        with pytest.raises(DomainError):
            simulate_tk(p, EnsembleState(0, [0, 0], [1e-14, 1.0]), IntegratorOptions())

    def test_t_end_before_start(self):
        p = ModelParams.uniform(2)
        with pytest.raises(DomainError):
            simulate_tk(p, EnsembleState(5.0, [0, 0], [1, 1]), IntegratorOptions(t_end=1.0))

    def test_underflow_reports_last_state(self):
        def blowup(t, y):
            with np.errstate(over="ignore"):
                return y**2 * 1e6

        with pytest.raises(IntegrationError) as exc:
            integrate(blowup, np.array([1.0]), IntegratorOptions(t_end=10.0))
        assert exc.value.last_state is not None

    def test_samples_iterator(self):
        p = random_params(1, 3)
        traj = simulate_tk(p, random_state(1, 3), IntegratorOptions(t_end=1.0))
        t, state, obs = next(traj.samples())
        assert t == 0.0 and isinstance(state, EnsembleState)
        assert 0 <= obs.order_parameter <= 1

    def test_empty(self):
        assert len(empty_trajectory("tk", 3)) == 0

    def test_packed_field_matches_rhs(self):
        from thermokuramoto.model import tk_rhs

        p, s = random_params(4, 5), random_state(4, 5)
        y = np.concatenate([s.phases, s.temps])
        dth, dT = tk_rhs(s, p)
        np.testing.assert_array_equal(tk_field(p)(0.0, y), np.concatenate([dth, dT]))
