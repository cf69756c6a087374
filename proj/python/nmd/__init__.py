"""Nonadiabatic molecular dynamics experiments (C++ core)."""

from ._core import (
    ConfigError,
    DegeneratePointError,
    EigenPair,
    EmptyEvents,
    Grid,
    InvalidArgument,
    OneD,
    Potential,
    RunError,
    SolverFailure,
    TwoDCone,
    TwoDLine,
    bo_trajectory,
    build_grid,
    ehrenfest_trajectory,
    eigs_near,
    excited_probability,
    gmd_monte_carlo,
    landau_zener_closed_form,
    landau_zener_ode,
    max_lyapunov,
    pe_md,
    run_config,
    validate_config,
)

__version__ = "0.1.0"
