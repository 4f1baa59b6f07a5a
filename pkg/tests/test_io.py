import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_params, random_state
from thermokuramoto.errors import DomainError, ScenarioParseError
from thermokuramoto.experiments import run_scenario
from thermokuramoto.integrator import IntegratorOptions, empty_trajectory, simulate_tk
from thermokuramoto.io import (
    emit_scenario,
    parse_scenario,
    plot_svg,
    read_trajectory_csv,
    ring_matrix,
    write_report_json,
    write_trajectory_csv,
)
from thermokuramoto.scenario import RandomInitial, Scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """
[model]
n = 3

[initial]
phases = [0.0, 0.5, 1.0]
temps = [1.0, 1.5, 2.0]
"""


class TestParse:
    def test_minimal_defaults(self):
        s = parse_scenario(MINIMAL)
        assert s.name == "scenario"
        assert s.params.kappa1 == 1.0 and s.params.eta == 0.0
        assert np.all(s.params.psi == 1.0) and np.all(s.params.nat_freq == 0.0)
        assert s.options == IntegratorOptions()
        assert s.claims == () and s.pairing == "none"

    def test_uniform_shorthand(self):
        s = parse_scenario(MINIMAL.replace("n = 3", 'n = 3\npsi = "uniform: 0.25"\nnu = "uniform: 0.1"'))
        assert np.all(s.params.psi == 0.25) and np.all(s.params.nat_freq == 0.1)

    def test_ring_shorthand(self):
        s = parse_scenario(MINIMAL.replace("n = 3", 'n = 3\nzeta = "ring: 0.5, 2.0"'))
        np.testing.assert_array_equal(s.params.zeta, ring_matrix(3, [0.5, 2.0]))
        m = ring_matrix(6, [0.1, 1.0, 0.5])
        assert m[0, 1] == m[0, 5] == 1.0 and m[0, 2] == m[0, 4] == 0.5 and m[0, 3] == 0.1 and m[0, 0] == 0.1

    def test_asymmetric_rejected(self):
        text = MINIMAL.replace("n = 3", "n = 3\npsi = [[1, 2, 1], [1, 1, 1], [1, 1, 1]]")
        with pytest.raises(DomainError, match="symmetric"):
            parse_scenario(text)

    def test_unknown_field_has_line(self):
        text = MINIMAL.replace("n = 3", "n = 3\nkapa1 = 2.0")
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario(text)
        assert exc.value.field == "model.kapa1" and exc.value.line == 4

    def test_wrong_type_has_line(self):
        text = MINIMAL.replace("n = 3", 'n = 3\nkappa1 = "strong"')
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario(text)
        assert exc.value.field == "model.kappa1" and exc.value.line == 4

    def test_malformed_toml(self):
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario("[model\nn = 3")
        assert exc.value.line == 1

    def test_wrong_length(self):
        with pytest.raises(ScenarioParseError, match="expected 3"):
            parse_scenario(MINIMAL.replace("[0.0, 0.5, 1.0]", "[0.0, 0.5]"))

    def test_random_needs_seed(self):
        text = "[model]\nn = 3\n[initial]\nphase_range = [0, 1]\ntemp_range = [1, 2]\n"
        with pytest.raises(ScenarioParseError, match="seed"):
            parse_scenario(text)

    def test_missing_section(self):
        with pytest.raises(ScenarioParseError, match="initial"):
            parse_scenario("[model]\nn = 2\n")

    def test_overrides(self):
        s = parse_scenario(MINIMAL, ["model.kappa1=2.5", "integrator.t_end=3", "name=demo"])
        assert s.params.kappa1 == 2.5 and s.options.t_end == 3 and s.name == "demo"

    def test_override_unknown_field(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario(MINIMAL, ["model.kappa3=1"])

    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.toml")), ids=lambda p: p.stem)
    def test_example_files_roundtrip(self, path):
        s = parse_scenario(path.read_text())
        again = parse_scenario(emit_scenario(s))
        assert again == s and again.name == s.name and again.hash == s.hash

    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_roundtrip_random(self, seed, n):
        p = random_params(seed, n)
        s = Scenario("r", p, random_state(seed, n), IntegratorOptions(rel_tol=1e-10), ("entropy_nondecreasing",))
        assert parse_scenario(emit_scenario(s)) == s


class TestHash:
    def base(self, **kw):
        p = random_params(1, 3)
        fields = dict(name="a", params=p, initial=RandomInitial((-1, 1), (1, 2), 5))
        fields.update(kw)
        return Scenario(**fields)

    def test_name_is_not_semantic(self):
        assert self.base().hash == self.base(name="b").hash

    def test_changes_with_semantics(self):
        h = self.base().hash
        assert self.base(params=random_params(1, 3).replace(kappa1=9.0)).hash != h
        assert self.base(initial=RandomInitial((-1, 1), (1, 2), 6)).hash != h
        assert self.base(claims=("entropy_nondecreasing",)).hash != h
        assert self.base(options=IntegratorOptions(t_end=11)).hash != h

    def test_stable_across_parse(self):
        text = (SCENARIO_DIR / "homogeneous.toml").read_text()
        assert parse_scenario(text).hash == parse_scenario(text).hash


class TestCsv:
    def test_columns_and_roundtrip(self, tmp_path):
        p = random_params(3, 4)
        traj = simulate_tk(p, random_state(3, 4), IntegratorOptions(t_end=2.0))
        path = tmp_path / "t.csv"
        write_trajectory_csv(traj, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header == (["t"] + [f"theta_{i}" for i in range(1, 5)] + [f"temp_{i}" for i in range(1, 5)]
                          + ["entropy", "phase_diameter", "temp_diameter", "order_parameter", "conserved_g",
                             "phase_sum"])
        back = read_trajectory_csv(path)
        np.testing.assert_allclose(back.times, traj.times, rtol=1e-15, atol=0)
        np.testing.assert_allclose(back.values, traj.values, rtol=1e-15, atol=0)

    def test_empty(self, tmp_path):
        path = tmp_path / "e.csv"
        write_trajectory_csv(empty_trajectory("tk", 2), path)
        assert path.read_text().strip() == ("t,theta_1,theta_2,temp_1,temp_2,entropy,phase_diameter,"
                                            "temp_diameter,order_parameter,conserved_g,phase_sum")
        assert len(read_trajectory_csv(path)) == 0

    def test_io_error_names_path(self, tmp_path):
        target = tmp_path / "missing" / "t.csv"
        with pytest.raises(OSError) as exc:
            write_trajectory_csv(empty_trajectory("tk", 2), target)
        assert str(target) in str(exc.value)


class TestReportAndPlot:
    def test_report_has_k_verdicts(self, tmp_path):
        s = parse_scenario((SCENARIO_DIR / "homogeneous.toml").read_text(),
                           ["integrator.t_end=10", "integrator.sample_interval=0.05", 'claims.ids=["entropy_nondecreasing", "temperature_bounds"]'])
        _, report = run_scenario(s)
        path = tmp_path / "r.json"
        write_report_json(report, path)
        data = json.loads(path.read_text())
        assert isinstance(data["verdicts"], list) and len(data["verdicts"]) == 2
        assert data["scenario_hash"] == s.hash and data["seed"] == 7
        for v in data["verdicts"]:
            assert {"claim_id", "measured", "bound", "tolerance", "passed", "margin"} <= set(v)
        assert "t_infinity" in data["measurements"]

    def test_svg(self, tmp_path):
        p = random_params(3, 3)
        traj = simulate_tk(p, random_state(3, 3), IntegratorOptions(t_end=2.0))
        path = tmp_path / "p.svg"
        plot_svg(traj, ["temp_diameter", "theta"], path, log_scale=True)
        text = path.read_text()
        assert text.lstrip().startswith("<?xml") and "<svg" in text
        with pytest.raises(ScenarioParseError):
            plot_svg(traj, ["nope"], tmp_path / "q.svg")
