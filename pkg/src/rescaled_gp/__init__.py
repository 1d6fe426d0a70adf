"""Rescaled squared-exponential Gaussian-field priors with a random bandwidth.

Modules
-------
spectral
    The field, its spectral measure, exact and feature-based sampling.
bandwidth
    Priors for the rescaling variable and their tail envelopes.
truths
    Test functions with certified smoothness.
rkhs
    RKHS elements, approximants, small-ball and concentration checks.
posterior
    MCMC for density estimation, regression and classification.
experiments
    Rate and adaptation experiments.
"""

from .bandwidth import EnvelopeParams, EnvelopePrior, GammaRootPrior, envelope_check, tail_bound
from .spectral import (
    FeatureExpansion,
    GridPath,
    GridSpec,
    SpectralMeasure,
    covariance,
    covariance_matrix,
    rescale,
    sample_features,
    sample_grid,
    spectral_density,
    subexponential_moment,
    verify_bochner,
)
from .truths import Analytic, Holder, TruthFunction, make_truth

__version__ = "0.1.0"
