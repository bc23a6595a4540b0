"""Precision matrix estimation under nonnegative partial correlations."""

from .losses import (
    LossReport,
    entropy_loss,
    gamma,
    loss_report,
    spectral_norm_diff,
    stein_loss,
    sym_stein_from_spectrum,
    sym_stein_loss,
)
from .matcore import (
    NotPositiveDefinite,
    SpectralDecomposition,
    as_symmetric,
    cholesky,
    congruence,
    frobenius_inner,
    inverse_psd,
    log_det,
    positive_part,
    sym_eigen,
)
from .mmle import (
    DoesNotExist,
    EstimateResult,
    ExistenceDiagnostic,
    KktResiduals,
    MMatrixCheck,
    NoConvergence,
    SolverConfig,
    attractive_part,
    check_existence,
    estimate_mle,
    is_m_matrix,
    kkt_residuals,
    support_graph,
)
from .models import (
    ModelSpec,
    build_model,
    cai_block,
    diagonal_model,
    equicorrelation,
    gamma_of_model,
    neumann_correlation_bound,
    random_laplacian_mmatrix,
)
from .sampling import (
    bernstein_bound,
    correlation_matrix,
    max_deviation,
    philox_stream,
    replication_seed,
    sample_covariance,
    sample_gaussian,
)

__version__ = "0.1.0"
