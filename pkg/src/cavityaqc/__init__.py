"""Cavity-assisted adiabatic evolution of spin Hamiltonians in the mean-field limit."""
from .dynamics import (
    ProtocolResult,
    Schedule,
    Trajectory,
    excitation_probability,
    extract_ramp_rate,
    integrate_coupled,
    lz_probability,
    run_linear_baseline,
    run_protocol,
    run_protocol_detuning,
)
from .errors import (
    CavityAQCError,
    DegenerateGround,
    EmptyResult,
    GenerationFailed,
    IntegrationError,
    InvalidInput,
    InvalidSpec,
    ParseError,
)
from .models import (
    BdGModel,
    Clause,
    DenseModel,
    ECInstance,
    ModelKind,
    ModelSpec,
    build_model,
    generate_ec_instance,
    parse_ec_clauses,
)
from .spectral import gap_location, ground_observables, xss_prime_fd, xss_prime_perturbative
from .stationary import (
    CavityParams,
    Control,
    Stability,
    bifurcation_points,
    feasibility_check,
    secular_frequencies,
    stationary_points,
    sweep_control,
)

__version__ = "0.1.0"
