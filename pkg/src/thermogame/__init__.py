"""Thermodynamic games of long-range lattice fermion models.

Infinite-volume pressures of long-range models come from a two-person
zero-sum game over the amplitudes of approximating quadratic interactions.
The package solves that game, its gap equations and the permutation-invariant
one-site problem, and cross-checks every result against exact
diagonalization on finite boxes.
"""

__version__ = "0.1.0"

from .model import (
    Channel,
    ChannelVector,
    ClusterTooLargeError,
    InteractionKernel,
    Lattice,
    LongRangeModel,
    ModelError,
    build_approximating_interaction,
    canonical_signature,
    hopping_kernel,
    interaction_norm,
    number_kernel,
    split_channel_vector,
    weighted_inner,
    weighted_norm,
    zero_kernel,
)
from .fockspace import (
    FockBasis,
    FockOperator,
    FockSpaceError,
    GibbsState,
    build_internal_energy,
    entropy_density,
    gibbs_state,
    kernel_operator,
    lro_estimator,
    passivity_check,
    pbc_consistency,
    pressure_ed,
    von_neumann_entropy,
)
from .quasifree import (
    BdGSpectrum,
    ConvergenceError,
    HubbardTypeModel,
    NotQuadraticError,
    QuadraticForm,
    QuadratureError,
    approximating_pressure,
    bdg_spectrum,
    channel_expectation,
    pressure_hubbard_type,
    pressure_quasifree,
    quadratic_from_kernel,
)
from .game import (
    GameSolution,
    SolverError,
    ThermodynamicGame,
    approx_free_energy,
    convergence_study,
    duality_gap_demo,
    inner_sup,
    odlro_bound,
    solve_game,
)
from .perminv import OneSiteState, perminv_gibbs_limit_check, perminv_pressure
from .config import ConfigError, bcs_model, forward_model, hubbard_type_model, ising_density_model, load_model, load_model_file
