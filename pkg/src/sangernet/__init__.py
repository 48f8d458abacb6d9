"""Deterministic simulation toolkit for sample-wise distributed PCA over graphs."""

from .datamodel import (
    Covariance,
    SpectrumSpec,
    center,
    combine_covariances,
    covariance,
    generate_gaussian,
    load_binary,
    load_csv,
    partition,
    population_basis,
    save_binary,
)
from .distributed import (
    AverageView,
    NetworkState,
    average_view,
    dpgd_run,
    dsa_run,
    dsa_step,
    dpgd_step,
    gha_local_run,
    local_sanger_directions,
    make_state,
    seqdistpm_run,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateIterateError,
    DegenerateSpectrumError,
    DisconnectedGraphError,
    GraphGenerationError,
    InfeasiblePartitionError,
    InsufficientDataError,
    InvalidGraphError,
    InvalidSpectrumError,
    SangerNetError,
    UndefinedAngleError,
)
from .estimators import DistributedSangerPCA, ExactPCA, GeneralizedHebbianPCA
from .harness import (
    ExperimentConfig,
    aggregate,
    compare,
    parse_config,
    run_experiment,
    run_trial,
    validate_config,
)
from .hebbian import (
    EigenBasis,
    gha_run,
    modified_gha_run,
    oi_run,
    orthogonal_iteration,
    orthonormal_init,
    sanger_direction,
    step_size_bound,
)
from .metrics import (
    Trajectory,
    avg_angle_error,
    consensus_deviation,
    fit_decay_rate,
    lemma_probes,
    rayleigh,
)
from .topology import (
    Graph,
    MixingMatrix,
    beta,
    complete,
    cycle,
    erdos_renyi,
    is_connected,
    load_edge_list,
    metropolis_weights,
    save_edge_list,
    star,
)

__version__ = "0.1.0"
