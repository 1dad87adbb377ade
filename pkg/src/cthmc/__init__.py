"""Continuous-time Hamiltonian Monte Carlo.

A piecewise-deterministic Markov process sampler whose deterministic flow
is Hamiltonian dynamics integrated by an adaptive embedded
Runge-Kutta-Nystrom method. Produces discrete samples and
trajectory-integrated moment estimates for user-defined continuous targets.
"""

from .adaptation import AdaptConfig, NutClock
from .diagnostics import EssReport, GaussianFlowOracle, ess_discrete, ess_integrated
from .events import EventClock, EventSpec, base_rate, locate_event, refresh_momentum
from .flow import (DivergenceError, MassMatrix, Monitor, PhaseState,
                   TargetModel, augmented_rhs, hamiltonian,
                   momentum_from_velocity, velocity_from_momentum)
from .rkn import (RknStepResult, SecondOrderSystem, StepController,
                  error_norm, interpolate, propose_step, rkn_step)
from .sampler import (RunConfig, TrajectoryOutput, run_ensemble,
                      run_trajectory)
from .targets import (funnel, gaussian_full, load_design_matrix,
                      logistic_regression, make_target, smile,
                      standardized_chi2, standardized_t, std_gaussian)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "NutClock",
    "EssReport", "GaussianFlowOracle", "ess_discrete", "ess_integrated",
    "EventClock", "EventSpec", "base_rate", "locate_event", "refresh_momentum",
    "DivergenceError", "MassMatrix", "Monitor", "PhaseState", "TargetModel",
    "augmented_rhs", "hamiltonian", "momentum_from_velocity",
    "velocity_from_momentum",
    "RknStepResult", "SecondOrderSystem", "StepController", "error_norm",
    "interpolate", "propose_step", "rkn_step",
    "RunConfig", "TrajectoryOutput", "run_ensemble", "run_trajectory",
    "funnel", "gaussian_full", "load_design_matrix", "logistic_regression",
    "make_target", "smile", "standardized_chi2", "standardized_t",
    "std_gaussian",
]
