"""Exact non-Markovian heat statistics of a damped quantum harmonic oscillator."""

from .errors import (
    ConfigError,
    DomainError,
    NumericalError,
    QHeatError,
    QuadratureError,
    SingularCoefficientError,
    SolverError,
    TruncationError,
)
from .heat import (
    HeatDistribution,
    HeatSetup,
    admissible_strip,
    characteristic_function,
    choose_l_max,
    effective_beta,
    heat_distribution,
    initial_level_prob,
    integral_ft_value,
    log_transition_probability,
    markovian_heat_stats,
    mean_heat,
    nbar,
    partition_function,
    steady_state_stats,
    transition_matrix,
    transition_probability,
    xi_grid,
)
from .oracle import FockModel, SingleParticleModel, fock_two_point_measurement, single_particle_u_v
from .propagator import (
    MasterCoefficients,
    TimeGrid,
    Trajectory,
    markovian_trajectory,
    master_coefficients,
    propagate,
    solve_u,
    solve_v,
)
from .spectral import (
    Discrete,
    KernelSamples,
    Ohmic,
    Semicircle,
    discretize_bath,
    evaluate_density,
    lamb_shift,
    memory_kernel_mu,
    noise_kernel_nu,
    tabulate_kernels,
)
from .spectrum import (
    AsymptoticState,
    BoundStateSet,
    asymptotic_state,
    asymptotic_u,
    asymptotic_v,
    background_theta,
    find_bound_states,
    pole_function,
    residue_weight,
    sum_rule,
)

__version__ = "0.1.0"
