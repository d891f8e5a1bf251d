"""Quantum kicked rotor, its Anderson-model mapping and finite-time scaling."""

from .core import (
    DEFAULT_OMEGAS,
    EnsembleSpec,
    IncompatibleDimensions,
    KRError,
    MemberError,
    OutOfRange,
    QuantumState,
    SimParams,
    ValidatedParams,
    ValidationError,
    derive_member_seed,
    load_config,
    rational_relation,
    save_config,
    validate,
)
from .classical import DiffusionEstimate, PhasePoint, RegimeWarning, classical_diffusion, standard_map_step
from .engine import (
    BasisTooSmall,
    EdgeLeak,
    KickSchedule,
    ObservableSeries,
    build_initial_state,
    evolve,
    propagate_one_period,
    run_ensemble,
)
from .anderson import (
    BoxDisorder,
    TightBindingModel,
    floquet_oracle,
    hopping_coefficients,
    pseudo_disorder,
    solve_tight_binding,
    transfer_matrix_xi,
)
from .scaling import (
    TransportCurve,
    beta_transport,
    critical_collapse,
    finite_time_scaling,
    fit_distribution_shape,
    phase_diagram,
    two_d_localization_law,
)

__version__ = "0.1.0"
