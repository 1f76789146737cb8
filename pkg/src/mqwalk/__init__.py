"""Quantum walks on Z^d with Markov-correlated random coins.

Exact single-realization evolution, the fibered transfer operator of the
averaged dynamics with its spectral data (drift, diffusion, gap), moderate and
large deviation rate functions, the permutation-coin classical reduction, and
the fully uncorrelated tensor model -- every transfer-operator quantity is
cross-checkable against brute-force path enumeration or Monte Carlo.
"""

__version__ = "0.1.0"

from .model import (
    CoinEnsemble,
    JumpFunction,
    SiteRepresentation,
    WalkModel,
    check_section7_conditions,
    check_trivial_commutant,
    compute_gamma,
    sigma_at,
    validate_model,
)

__all__ = [
    "CoinEnsemble",
    "JumpFunction",
    "SiteRepresentation",
    "WalkModel",
    "check_section7_conditions",
    "check_trivial_commutant",
    "compute_gamma",
    "sigma_at",
    "validate_model",
    "__version__",
]
