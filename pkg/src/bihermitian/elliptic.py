"""Gauduchon factors and the Chern-Poisson equation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleDataError, PositivityError, SolverFailure
from .forms import SplitForm, is_positive, pluriclosed_residual
from .grid import NEUMANN, ScalarField, integrate, sup_norm
from .linalg import SplitOperator, solve_bordered


@dataclass(frozen=True)
class GauduchonReport:
    """Diagnostics of a Gauduchon-factor solve.

    Attributes
    ----------
    residual : float
        Interior sup norm of the pluriclosed residual of ``e^f omega``,
        divided by the sup norm of ``e^f omega``.
    normalization_error : float
        ``|int e^{2f} omega^2 / int omega^2 - 1|``.
    method : str
    iterations : int
    """

    residual: float
    normalization_error: float
    method: str
    iterations: int


def _components(omega):
    if not is_positive(omega, 0.0):
        raise PositivityError("Gauduchon factor needs a positive metric")
    return omega.plus.values, omega.minus.values


def gauduchon_density(omega, tol=1e-13):
    """Positive ``psi`` with ``M(f_plus psi) + P(f_minus psi) = 0``.

    The pluriclosed condition for ``psi * omega`` is linear in ``psi``, so
    ``psi`` is the null vector of ``x -> P(f_minus x) + M(f_plus x)``. Its
    cokernel is spanned by the quadrature weights, which makes the bordered
    system ``[[B, 1], [w^T, 0]]`` non-singular. The result is normalised to
    unit weighted mean.
    """
    a, b = _components(omega)
    grid = omega.grid
    op = SplitOperator(grid, b, a, inner=True)
    w = grid.weights()
    y, mu, info = solve_bordered(op, 1.0, w / np.sum(w), np.zeros(grid.shape), 1.0, tol=tol)
    if not np.all(y > 0):
        raise SolverFailure("Gauduchon density is not positive", [info["residual"]])
    return y, info


def gauduchon_factor(omega, tol=1e-10):
    """Normalised conformal exponent making ``e^f omega`` pluriclosed.

    Parameters
    ----------
    omega : SplitForm
        Positive split metric.
    tol : float
        Acceptance threshold for the relative pluriclosed residual.

    Returns
    -------
    f : ScalarField
        Normalised so that ``int e^{2f} omega^2 = int omega^2``.
    report : GauduchonReport

    Raises
    ------
    SolverFailure
        If the residual of the result exceeds ``tol``.
    """
    a, b = _components(omega)
    grid = omega.grid
    psi, info = gauduchon_density(omega)
    vol = 2 * a * b
    shift = 0.5 * np.log(integrate(vol, grid) / integrate(psi ** 2 * vol, grid))
    f = np.log(psi) + shift
    conformal = omega * ScalarField(grid, np.exp(f))
    res = pluriclosed_residual(conformal, NEUMANN) / max(conformal.sup(), 1e-300)
    norm_err = abs(integrate(np.exp(2 * f) * vol, grid) / integrate(vol, grid) - 1)
    report = GauduchonReport(float(res), float(norm_err), info["method"],
                             int(info["iterations"]))
    if res > tol:
        raise SolverFailure(f"Gauduchon residual {res:.3e} above {tol:.1e}", [res])
    return ScalarField(grid, f), report


def _poisson(omega, g_rhs, tol=1e-13):
    """Solve ``f_minus P u + f_plus M u + mu * 2 f_plus f_minus = g`` with mean(u) = 0."""
    a, b = _components(omega)
    grid = omega.grid
    op = SplitOperator(grid, b, a)
    w = grid.weights()
    u, mu, info = solve_bordered(op, 2 * a * b, w / np.sum(w), g_rhs, 0.0, tol=tol)
    return u, mu, info


def chern_poisson_solve(omega, v, compat_tol=1e-8):
    """Solve ``Delta_omega u = v`` with zero mean.

    The equation is solvable exactly when ``v`` integrates to zero against
    ``e^f omega^2`` with ``f`` the Gauduchon factor. The bordering unknown
    of the discrete solve equals that weighted average of ``v``; when it
    exceeds ``compat_tol * sup|v|`` the data are rejected.

    Raises
    ------
    IncompatibleDataError
        With the compatibility integral ``int v e^f omega^2`` in the message.
    """
    a, b = _components(omega)
    vv = np.asarray(v.values if isinstance(v, ScalarField) else v, dtype=float)
    grid = omega.grid
    u, mu, _ = _poisson(omega, 2 * a * b * vv)
    if abs(mu) > compat_tol * sup_norm(vv, grid, interior=False) + 1e-14:
        f, _ = gauduchon_factor(omega, tol=np.inf)
        integral = integrate(vv * np.exp(f.values) * 2 * a * b, grid)
        raise IncompatibleDataError(
            f"incompatible right-hand side: int v e^f omega^2 = {integral:.6e}")
    return ScalarField(grid, u)


def conformal_metric(omega, f):
    """``e^f omega`` for a scalar field ``f``."""
    return SplitForm(omega.plus * np.exp(f), omega.minus * np.exp(f))
