"""Spectral analysis of Gram matrices built from dependent stationary sequences."""

import types as _types

from ._version import __version__
from .errors import (
    CovarianceError,
    DomainError,
    InsufficientDataError,
    MixspecError,
    ParameterError,
    SchemeError,
    ShapeError,
    SolverError,
    TruncationOrderError,
    UnsupportedModelError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    run_approximation_chain,
    run_concentration,
    run_lsd_convergence,
    run_universality,
)
from .kernels import BACKEND
from .lsd import (
    constant_density,
    density_from_stieltjes,
    fixed_point_residual,
    limit_cdf,
    mp_reference,
    solve_fixed_point,
    spectral_density,
)
from .matrices import (
    BlockScheme,
    DataMatrix,
    EnsembleConfig,
    build_An,
    build_Bn,
    build_block_scheme,
    build_blocked_matrix,
    build_Gn,
    resample_independent_blocks,
    stieltjes_perturbation_bound,
)
from .processes import (
    AutocovarianceSeq,
    BetaDecayModel,
    ProcessSpec,
    Trajectory,
    autocovariance_closed_form,
    beta_decay,
    check_cond_beta,
    estimate_autocovariance,
    sample_trajectory,
)
from .spectral import GramSpectrum, eig_sym, empirical_stieltjes, kolmogorov_distance

__all__ = sorted(
    name for name, obj in globals().items()
    if not name.startswith("_") and not isinstance(obj, _types.ModuleType)
)
