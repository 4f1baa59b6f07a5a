"""Thermodynamic Kuramoto oscillators: simulation, equilibria, and claim verification."""

from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    FitError,
    InfeasibleError,
    IntegrationError,
    ScenarioParseError,
)
from .model import EnsembleState, ModelParams, Observables, asymptotic_temperature, kuramoto_rhs, tk_rhs
from .tcs import TcsState, ansatz_embed, ansatz_project, galilean_shift, tcs_rhs
from .integrator import IntegratorOptions, Trajectory, integrate, simulate_kuramoto, simulate_tcs, simulate_tk
from .equilibrium import classify_bipolar, shift_bound, solve_phase_locked
from .analysis import ClaimVerdict, fit_decay, verify_trajectory
from .scenario import Perturbation, RandomInitial, Scenario, validate_scenario
from .experiments import kuramoto_shadow, monte_carlo, run_scenario, tcs_reduction, twin_l1

__version__ = "0.1.0"
