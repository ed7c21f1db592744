"""Brownian first-passage simulation around thin bodies of revolution ("thorns").

Modules
-------
profiles    thorn profiles f, g = z / f, hypothesis checks, integral test
geometry    thorn sets and obstacles, membership and distance bounds
exact       closed-form hitting laws and deterministic bound evaluators
sampler     walk-on-spheres and Euler-Maruyama engines and estimators
moments     direction measure W_L, moment diagnostics, spherical integrals
greencheck  checks of the two-set avoidance identity
cli         command-line front end
"""

from ._backend import backend
from .errors import DomainError, ExtrapolationError, InsufficientSignal, SingularInputError

__version__ = "0.1.0"

__all__ = [
    "backend",
    "DomainError",
    "ExtrapolationError",
    "InsufficientSignal",
    "SingularInputError",
    "__version__",
]
