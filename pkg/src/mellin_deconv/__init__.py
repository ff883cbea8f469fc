"""Multiplicative deconvolution by spectral cut-off in the Mellin domain."""

__version__ = "0.1.0"

from .distributions import (
    Beta1b,
    DecayProfile,
    Gamma,
    LogNormal,
    NoNoise,
    ProductModel,
    SampleMatrix,
    ScaledBeta,
    ScaledLogGamma,
    Uniform01,
    Weibull,
    contaminate,
    decay_profile,
    density,
    mellin_closed_form,
    parse_model,
    sample,
)
from .estimator import (
    DensityEstimate,
    RiskDecomposition,
    delta_g,
    empirical_mellin,
    estimate_at,
    estimate_on_grid,
    minimax_cutoff_schedule,
    theoretical_risk,
)
from .mellin import (
    FrequencyFunction,
    mellin_forward,
    mellin_inverse,
    mult_convolve,
    plancherel_norm_sq,
    sobolev_seminorm_sq,
    weighted_l2_norm_sq,
)
from .quadrature import CutoffVector, MellinContext, QuadratureConfig, SetDifference
from .selection import (
    SelectionConfig,
    SelectionTrace,
    a_hat,
    cutoff_grid,
    select_cutoff,
    sigma_hat,
    v_hat,
)
