"""Frequency regulation from building-scale thermostatic appliance fleets."""

from .capability import (
    CapabilityReport,
    capability_report,
    long_term_bound,
    provision_thresholds,
    qualification_limit,
    short_term_bounds,
    spinning_reserve,
)
from .control import ControllerConfig, ControlOutcome, control_for_ramp, control_law
from .dispatch import (
    BuildingSnapshot,
    DispatchMethod,
    DispatchProblem,
    DispatchSolution,
    proportional_dispatch,
    solve,
    solve_oracle,
)
from .errors import (
    ConfigurationError,
    ControlSaturationError,
    GainSelectionError,
    ParameterError,
    SignalError,
    SimulationError,
    SingularStateError,
    SolverError,
    ThermoflexError,
)
from .fleet import BuildingParams, Fleet, RateSet, SystemMatrices, build_matrices, derive_rates, output, step
from .observer import ObserverState, observer_step, select_gain
from .scenario import Scenario, load_scenario, parse_scenario
from .signals import RegulationSignal, generate_synthetic, generate_t50, ingest_signal
from .simulation import SimTrace, StatsTable, run_simulation, run_t50, summarize, sweep_rr

__version__ = "0.1.0"
