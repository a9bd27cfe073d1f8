"""Recursive distributional equations X = Phi(X1, X2): forcing laws,
effective coefficients, Monte Carlo and deterministic CDF evolution, and
checks against the Beta(2,1) / Beta(2,2) scaling limits."""

__version__ = "0.1.0"

from .cdf import ExtendedCDF, IntegrityError, LatticeCDF  # noqa: E402
from .coefficients import (EffectiveCoefficients, appendixC_identities, compute_a,  # noqa: E402
                           compute_sigma, dilog, effective_coefficients, select_alpha, trilog)
from .forcing import (DomainError, ForcingFunction, ForcingLaw, LinearCap, LogExp, Zero,  # noqa: E402
                      apply_phi, validate_class_S)
from .mc_engine import InitialDistribution, SamplePopulation  # noqa: E402
from .pde_ref import LimitLaw, limit_law  # noqa: E402

__all__ = [
    "ExtendedCDF", "LatticeCDF", "IntegrityError", "EffectiveCoefficients", "appendixC_identities",
    "compute_a", "compute_sigma", "dilog", "trilog", "effective_coefficients", "select_alpha",
    "DomainError", "ForcingFunction", "ForcingLaw", "LinearCap", "LogExp", "Zero", "apply_phi",
    "validate_class_S", "InitialDistribution", "SamplePopulation", "LimitLaw", "limit_law",
]
