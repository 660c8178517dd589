"""Numerical solver and certificates for parabolic complex Hessian equations.

Solves F(Hu) = exp(u_t + G(t, z, u)) g(z) on strictly pseudoconvex domains
in C^n, where F(H) = f(lambda(H)) is a Hessian-type operator such as
sigma_k^(1/k), with Dirichlet data phi on the lateral boundary and initial
data u0.
"""

__version__ = "0.1.0"

from .grid_domain import (ConfigurationError, GridDomain, ProblemSpec, SpaceTimeField,  # noqa: E402
                          TimeGrid, make_ball_domain)
from .hessian_core import SymOpSpec, sigma_k_root  # noqa: E402
from .solver import SolveResult, SolverConfig, solve  # noqa: E402

__all__ = [
    "ConfigurationError", "GridDomain", "ProblemSpec", "SpaceTimeField", "SolveResult", "SolverConfig",
    "SymOpSpec", "TimeGrid", "make_ball_domain", "sigma_k_root", "solve", "__version__",
]
