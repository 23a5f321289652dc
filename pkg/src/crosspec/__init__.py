"""crosspec: sparse estimation of a hidden process's cross-power spectrum
from the spectrum of a linearly mixed, noisy observation, plus the
synthetic benchmark harness comparing it against the classical two-step
pipeline."""

__version__ = "0.1.0"

from .fista import (
    DEFAULT_KAPPA_GRID,
    FistaConfig,
    FistaResult,
    SplitSpectrum,
    fista_solve,
    lambda_grid,
    lambda_star,
    objective,
    random_hermitian_init,
    shrink,
)
from .kron import (
    KronOperator,
    KronWorkspace,
    LeadField,
    PowerIterationError,
    build_permutations,
    lipschitz_constant,
    unvec,
    vec,
)
from .metrics import (
    ConnectionSet,
    EvalReport,
    err_metric,
    evaluate,
    evaluate_matrix,
    pair_distance,
    sparsity_table,
    supra_threshold,
)
from .simulate import (
    GroundTruth,
    MvarModel,
    SamplingError,
    SimulationSpec,
    accept_signals,
    bandpass,
    check_stability,
    coarsen_leadfield,
    draw_mvar,
    generate_observations,
    make_ground_truth,
    select_sources,
    simulate_mvar,
    synthetic_leadfield,
)
from .spectral import (
    CrossSpectrum,
    TimeSeriesSet,
    WelchConfig,
    forward_cross_spectrum,
    hamming_window,
    peak_bin,
    welch_cross_spectrum,
    welch_full_spectrum,
)
from .twostep import (
    TikhonovConfig,
    default_lambda_grid,
    normalize_observations,
    tikhonov_estimate,
    two_step_cps,
)

__all__ = [name for name in dir() if not name.startswith("_")]
