"""Closed-system decoherence simulation and pointer-basis verification."""

from .analysis import (
    DecoherenceSeries,
    MeasurementRun,
    compare_to_collapse,
    convergence_check,
    decoherence_factors,
    decoherence_time,
    off_diagonality,
    run_measurement,
)
from .evolution import (
    StateTrajectory,
    TimeGrid,
    branch_states,
    evolve,
    expectation,
    reduced_state,
)
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    DomainError,
    EidError,
    InvalidPartitionError,
    InvariantBreachError,
    ModelViolationError,
    StructureError,
)
from .linalg import (
    DensityOperator,
    Operator,
    PureState,
    SpectralDecomposition,
    commutator_norm,
    evolve_unitary,
    partial_trace,
    pauli,
    spectral,
    tensor,
)
from .models import (
    CompositeHamiltonian,
    MeasurementModel,
    PointerObservable,
    SpinBathHamiltonian,
    build_collapsed_mixture,
    build_correlated_state,
    build_spin_bath,
    decompose_composite,
    lift_pointer,
)
from .pointer import (
    ContextVerdict,
    RegimeReport,
    SieveResult,
    check_preferred_context,
    classify_regime,
    pointer_stability,
    predictability_sieve,
)

__version__ = "0.1.0"
