"""Exception hierarchy.

Errors fall in three families that the command line maps to exit codes:
bad input (the hypotheses of a result are not met, exit 2), a certified
inequality that failed to hold on numbers that satisfied its hypotheses
(a bug or a numerically singular input, exit 3), and configuration
problems (exit 4).
"""


class LyapBoundError(Exception):
    """Base class for all package errors."""


# -- matrix-level input problems ------------------------------------------

class InvalidMatrix(LyapBoundError, ValueError):
    """Matrix is not square, not finite, or not of the expected kind."""


class DegenerateMatrix(LyapBoundError, ValueError):
    """A singular value needed for a ratio is zero (or numerically zero)."""


class NotPositiveDefinite(LyapBoundError, ValueError):
    """Smallest eigenvalue is below the positive-definiteness tolerance."""


class NotNormal(LyapBoundError, ValueError):
    """Matrix fails the normality test ``M^T M == M M^T``."""


class UnknownSymbol(LyapBoundError, KeyError):
    """A sampled symbol has no matrix attached in the cocycle."""


class ConfigError(LyapBoundError, ValueError):
    """Malformed or unknown run configuration."""


# -- hypotheses of a bound not satisfied (exit code 2) ------------------

class HypothesisNotMet(LyapBoundError, ValueError):
    """The input lies outside the domain where a bound is certified."""


class DomainError(HypothesisNotMet):
    """Parameter outside its admissible range."""


class NearSingularArgument(DomainError):
    """F-function or transfer-matrix argument too close to a singular point."""


class APHypothesisViolated(HypothesisNotMet):
    """Gap/alignment conditions of the Avalanche Principle do not hold."""


class AlphaTooLarge(HypothesisNotMet):
    """Deficit alpha is too large for the alignment constant to survive."""


class PerturbationTooLarge(HypothesisNotMet):
    """Perturbation size exceeds the admissible radius delta_0."""


class MixedRegime(HypothesisNotMet):
    """Jacobi couplings straddle 1, so no uniform diagonal class exists."""


class EnergyTooLarge(HypothesisNotMet):
    """Energy outside the stability window |E| < E_0."""


# -- a certified inequality failed (exit code 3) --------------------------

class BoundViolated(LyapBoundError, AssertionError):
    """A certified inequality did not hold on admissible input."""


class SandwichViolated(BoundViolated):
    """Avalanche Principle two-sided estimate failed."""


class CertificateBroken(BoundViolated):
    """Measured quantities contradict a certificate that should dominate them."""


class QuadratureUnderresolved(BoundViolated):
    """Node doubling changed a quadrature value by more than its tolerance."""
