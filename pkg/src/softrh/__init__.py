"""Soft Riemann-Hilbert expansions of planar orthogonal polynomials.

The pipeline works in circle coordinates: a droplet geometry is transported
to the exterior disk, the boundary data (R, Rhat, H_R, W_R) are built as
truncated polarized series, and a Neumann hierarchy produces the
approximations B, A and F of increasing order in 1/m.
"""

from .polar_series import AnnulusSpec, CircleSeries, PolarizedSeries, rho_of_sigma
from .potential import DropletGeometry, PotentialModel, build_droplet, build_model
from .expansion import Expansion, ExpansionArtifacts, evaluate_P_approx, kappa_star

__all__ = [
    "AnnulusSpec", "CircleSeries", "PolarizedSeries", "rho_of_sigma",
    "DropletGeometry", "PotentialModel", "build_droplet", "build_model",
    "Expansion", "ExpansionArtifacts", "evaluate_P_approx", "kappa_star",
]
