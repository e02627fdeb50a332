"""Local, deterministic hidden-variable collapse dynamics for finite-dimensional systems."""

from .linalg import (
    basis_state,
    density_matrix,
    hermitian_exp,
    partial_trace,
    projector,
    state_vector,
    tensor_product,
    trace_distance,
    validate,
)
from .model import (
    HiddenVariables,
    LindbladSet,
    MeasurementContext,
    SigmaCascade,
    analytic_sigma_sign_probability,
    build_lindblad_set,
    compute_branch_amplitudes,
    compute_sigma_cascade,
    exact_outcome_distribution,
    exact_outcome_probability,
    predict_outcome,
    sample_hidden_variables,
)
from .dynamics import Trajectory, TrajectoryConfig, asymptotic_outcome, integrate, master_rhs
from .ensemble import (
    AnnulusSampler,
    DiskSampler,
    EnsembleConfig,
    EnsembleResult,
    averaged_density_matrix,
    no_signalling_check,
    run_ensemble,
    skewed_outcome_probability,
)
from .oracle import (
    SINGLET_LABEL_ORDER,
    SingletParams,
    lambda_decay_rate,
    n2_solution,
    n4_averaged_solution,
    n4_singlet_solution,
    singlet_state,
)

__version__ = "0.1.0"
