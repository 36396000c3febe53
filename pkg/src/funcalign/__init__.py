"""Bayesian joint smoothing and registration of grouped functional data."""

from .basis import SplineBasis, eval_design, greville_abscissae, make_basis, penalty_matrix
from .chain import Chain
from .model import (
    Bases,
    Curve,
    FunctionalDataset,
    Hyperparams,
    ModelState,
    log_likelihood,
    make_bases,
    normalize_time,
    register_curve,
    smooth_eval,
    warped_mean,
)
from .sampler import SamplerConfig, posterior_summary, run_chain
from .warping import (
    WarpHyper,
    denormalize_phi,
    elicit_identity,
    prior_moments_phi,
    sample_prior_warp,
    warp_eval,
    warp_invert,
    xi_to_phi,
)

__version__ = "0.1.0"
