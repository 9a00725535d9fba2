"""Numerical solver for gradient-map flows of the arctan-Hessian operator.

Evolves u_t = sum_i arctan(lambda_i(D2u)) - f(x, Du) on a uniformly convex
domain under the oblique condition that Du maps the domain onto a
prescribed convex target, extracts the limiting translation speed and
profile, validates the admissibility (smallness) conditions, and
cross-checks the flow against a stationary Newton oracle and discrete
Legendre duality.
"""

__version__ = "0.1.0"

from . import geometry, operator, source, grid, flow, legendre, stationary  # noqa: F401
from .errors import SolverError, ConfigError  # noqa: F401
