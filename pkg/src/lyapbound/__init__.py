"""Certified lower bounds on Lyapunov exponents of matrix products.

Submodules
----------
matan
    Singular values, rifts, matrix logarithms.
avalanche
    Hypotheses and two-sided estimate of the Avalanche Principle.
gt_bounds
    Multivariate Golden-Thompson checks and finite/ergodic lower bounds.
schrodinger
    Transfer matrices, F-functions and the polymer model certificate.
stability
    Stability near rank-one, off-spectrum, diagonal and Jacobi sequences.
almost_commuting
    Conditional bound for almost-commuting positive definite factors.
dynamics
    Samplers and cocycles.
estimator
    Renormalized products and the Monte Carlo harness.
"""

__version__ = "0.1.0"

from .avalanche import AP_V1, AP_V2, APParams, CertifiedBound, ap_sandwich, check_ap  # noqa: E402
from .errors import BoundViolated, HypothesisNotMet, LyapBoundError  # noqa: E402
from .estimator import MCResult, RenormProduct, finite_exponent, mc_lyapunov  # noqa: E402

__all__ = [
    "AP_V1",
    "AP_V2",
    "APParams",
    "BoundViolated",
    "CertifiedBound",
    "HypothesisNotMet",
    "LyapBoundError",
    "MCResult",
    "RenormProduct",
    "__version__",
    "ap_sandwich",
    "check_ap",
    "finite_exponent",
    "mc_lyapunov",
]
