"""Split-type bi-Hermitian geometry on tori, Hopf cylinders and Inoue strips.

The main entry points are re-exported here; see the submodules for details.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .backends import flat_torus_metric, make_grid, tricerri_metric, weight_potentials
from .cohomology import cone_coordinates, conformal_family, decompose, realize_proportional
from .curvature import bismut_ricci, bundle_flatness_residual, chern_laplacian
from .elliptic import chern_poisson_solve, gauduchon_factor
from .errors import (BihermitianError, ConfigurationError, DegenerateBasisError,
                     GridMismatchError, IncompatibleDataError, NotInConeError,
                     PluriclosedError, PositivityError, SolverFailure)
from .forms import SplitForm, box, bracket, involution, is_positive, pluriclosed_residual
from .grid import GridSpec, ScalarField, integrate, random_smooth_field
from .hopf import k_profile, project_to_su, soliton_residual, su_metric, su_prime
from .tma import (SolveReport, SolverOptions, TmaProblem, estimates_report, flatten_bundle,
                  prescribe_bismut_ricci, solve_linear, solve_nonlinear)
