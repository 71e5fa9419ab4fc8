"""Numerical laboratory for L2 contraction and decay of planar viscous shocks.

Scalar viscous conservation laws ``u_t + div F(u) = Delta u`` on
``R x T^(n-1)`` with a convex-dominated normal flux ``a u^2 + g(u)``.
"""
from .flux import FluxSpec, ScalarFunction, ShockData, check_admissibility, rankine_hugoniot
from .grid import Field, Grid
from .profile import ShockProfile, beta_constants, solve_profile

__version__ = "0.1.0"

__all__ = [
    "FluxSpec", "ScalarFunction", "ShockData", "check_admissibility", "rankine_hugoniot",
    "Field", "Grid", "ShockProfile", "beta_constants", "solve_profile",
]
