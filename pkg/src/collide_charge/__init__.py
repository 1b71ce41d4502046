"""Repeated collisional charging of an oscillator battery by diagonal fuel.

Build energy-preserving collision specs, compile them into banded
transition matrices, evolve battery distributions, and classify each
charging chain as transient, positive-recurrent or null-recurrent.
"""

from .core import (
    BatteryDistribution,
    EnergyValue,
    QuditState,
    StateClass,
    classify_state,
    ergotropy,
    geometric_distribution,
    mean_energy,
    tv_distance,
)
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    ReducibleChainError,
    TruncationOverflowError,
    ValidationError,
)
from .evolve import (
    PathSample,
    PathStatus,
    Trajectory,
    apply_step,
    evolve,
    evolve_adaptive,
    sample_path,
    write_snapshot_csv,
    write_trajectory_csv,
)
from .markov import (
    ChainClass,
    ChainVerdict,
    DriftMode,
    DriftReport,
    EstimationBudget,
    LyapunovFunction,
    ReturnStats,
    StationaryResult,
    check_irreducible,
    classify_empirical,
    classify_qubit_chain,
    estimate_return_stats,
    first_return_probability,
    foster_drift_check,
    format_report,
    hitting_probability,
    recurrent_lyapunov_qubit,
    solve_stationary,
    stationary_direct,
    stationary_distribution,
    transient_lyapunov_qubit,
)
from .rng import rng_for
from .sampling import (
    SamplerConfig,
    random_bistochastic_block,
    random_bistochastic_spec,
    random_qudit_state,
    random_unitary_block,
)
from .transition import (
    BlockKind,
    BlockSpec,
    QubitSwapParams,
    TransitionMatrix,
    build_transition_matrix,
    identity_unitary_blocks,
    oracle_collision_step,
    qubit_swap_blocks,
    qubit_transition_matrix,
    read_transition_matrix,
    swap_unitary_blocks,
    unistochastic_from_blocks,
    write_transition_matrix,
)

__version__ = "0.1.0"
