"""Classes of pluriclosed split forms modulo box-exact terms.

Brackets descend to classes when both arguments are pluriclosed, which gives
coordinates by plain linear algebra. The constructive side solves one
Chern-Poisson problem: ``omega_1 + box u = c omega_2`` has a solution exactly
when ``{omega_1, omega_2} = 0``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .elliptic import _poisson, gauduchon_factor
from .errors import (DegenerateBasisError, IncompatibleDataError,
                     PluriclosedError, PositivityError)
from .forms import (SplitForm, box, bracket, form_scale,
                    is_positive, pluriclosed_residual)
from .grid import NEUMANN, ScalarField, integrate, sup_norm

# closedness gate, relative to the sup of the form's components
PLURICLOSED_TOL = 1e-6


def require_pluriclosed(omega, tol=PLURICLOSED_TOL, name="form"):
    res = pluriclosed_residual(omega)
    if res > tol * form_scale(omega):
        raise PluriclosedError(f"{name} is not pluriclosed (residual {res:.3e})")


def bracket_scale(eta, gamma):
    """Integral of the absolute bracket integrand, for relative tests."""
    return integrate(np.abs(eta.plus.values * gamma.minus.values)
                     + np.abs(eta.minus.values * gamma.plus.values), eta.grid)


class Realization(NamedTuple):
    """Solution of ``omega_1 + box u = c omega_2``.

    ``residual`` is the interior sup of ``omega_1 + box u - c omega_2``,
    ``ratio_gap`` the interior sup of the difference of component ratios,
    ``multiplier`` the bordering unknown (zero for compatible data).
    """

    u: ScalarField
    c: float
    omega_u: SplitForm
    residual: float
    ratio_gap: float
    multiplier: float


def realize_proportional(omega1, omega2, compat_tol=1e-6, bracket_fn=bracket,
                         check_closed=True):
    """Deform ``omega1`` by ``box u`` into a constant multiple of ``omega2``.

    Parameters
    ----------
    omega1 : SplitForm
        Pluriclosed form.
    omega2 : SplitForm
        Positive pluriclosed metric.
    compat_tol : float
        Largest accepted ``|{omega1, omega2}|`` relative to
        :func:`bracket_scale`.
    bracket_fn : callable
        Pairing used for the compatibility test (Hopf grids pass a
        tail-corrected one).

    Returns
    -------
    Realization

    Raises
    ------
    IncompatibleDataError
        If the bracket does not vanish; the message carries its value.
    """
    if not is_positive(omega2, 0.0):
        raise PositivityError("target metric must be positive")
    if check_closed:
        require_pluriclosed(omega2, name="target metric")
        require_pluriclosed(omega1, name="source form")
    br = float(bracket_fn(omega1, omega2))
    if abs(br) > compat_tol * max(bracket_scale(omega1, omega2), 1e-300):
        raise IncompatibleDataError(f"classes are not perpendicular: bracket = {br:.6e}")
    a1, b1 = omega1.plus.values, omega1.minus.values
    a2, b2 = omega2.plus.values, omega2.minus.values
    grid = omega1.grid
    # (a1 + P u) / a2 = (b1 - M u) / b2
    u, mu, _ = _poisson(omega2, a2 * b1 - a1 * b2)
    u = ScalarField(grid, u)
    omega_u = omega1 + box(u, NEUMANN)
    c = (integrate(omega_u.plus.values * b2 + omega_u.minus.values * a2, grid)
         / integrate(2 * a2 * b2, grid))
    residual = (omega_u - omega2 * c).sup()
    gap = sup_norm(omega_u.plus.values / a2 - omega_u.minus.values / b2, grid)
    return Realization(u, float(c), omega_u, float(residual), float(gap), float(mu))


class Decomposition(NamedTuple):
    """``omega = rA basisA + rB basisB + box u`` with diagnostics."""

    rA: float
    rB: float
    u: ScalarField
    residual: float
    bracket_coords: tuple


def decompose(omega, basisA, basisB, bracket_fn=bracket, degenerate_tol=1e-10):
    """Coordinates and box potential of a pluriclosed form in a two-class basis.

    The coordinates follow from ``{omega, A} = rB {B, A}`` and
    ``{omega, B} = rA {A, B}``. The potential ``u`` is produced
    constructively: ``omega`` (sign-adjusted) plus a multiple of one basis
    metric is paired to zero against a positive combination of both, then
    realised proportionally; the constants of that realisation give the
    coordinates a second time.

    Raises
    ------
    DegenerateBasisError
        If ``{basisA, basisB}`` vanishes to ``degenerate_tol``.
    """
    for name, form in (("form", omega), ("basisA", basisA), ("basisB", basisB)):
        require_pluriclosed(form, name=name)
    for name, form in (("basisA", basisA), ("basisB", basisB)):
        if not is_positive(form, 0.0):
            raise PositivityError(f"{name} must be positive")
    D = float(bracket_fn(basisB, basisA))
    if abs(D) <= degenerate_tol * max(bracket_scale(basisA, basisB), 1e-300):
        raise DegenerateBasisError(f"basis pairing {{B, A}} = {D:.3e} vanishes")
    rA_br = float(bracket_fn(omega, basisB)) / (-D)
    rB_br = float(bracket_fn(omega, basisA)) / D

    # orient so that {B, A} > 0
    swap = D < 0
    A, B = (basisB, basisA) if swap else (basisA, basisB)
    D = abs(D)
    wB = float(bracket_fn(omega, B))
    sigma = -1.0 if wB > 0 else 1.0
    hat_B = sigma * wB
    hat_A = sigma * float(bracket_fn(omega, A))
    if hat_B == 0.0:
        # omega itself is proportional to B in class
        a_coef, b_coef = 0.0, None
        target = B
    else:
        b_coef = 1.0 if hat_A <= 0 else 1.0 + 2.0 * hat_A / (-hat_B)
        a_coef = -(b_coef * hat_B + hat_A) / D
        target = B * b_coef + A
    left = omega * sigma + B * a_coef
    real = realize_proportional(left, target, bracket_fn=bracket_fn, check_closed=False)
    c = real.c
    if b_coef is None:
        cA, cB = 0.0, c
    else:
        # sigma omega = c A + (c b - a) B - box u
        cA, cB = c, c * b_coef - a_coef
    rA, rB = sigma * cA, sigma * cB
    if swap:
        rA, rB = rB, rA
    u = ScalarField(omega.grid, -sigma * real.u.values)
    recon = omega - basisA * rA - basisB * rB - box(u, NEUMANN)
    return Decomposition(float(rA), float(rB), u, float(recon.sup()), (rA_br, rB_br))


def conformal_family(omega0, t):
    """Gauduchon-normalised metric of unit volume in the class of ``(e^t f+, e^-t f-)``."""
    tilde = SplitForm(omega0.plus * np.exp(t), omega0.minus * np.exp(-t))
    f, _ = gauduchon_factor(tilde)
    out = tilde * np.exp(f)
    vol = integrate(2 * out.plus.values * out.minus.values, out.grid)
    return out * (1.0 / np.sqrt(vol))


class ConeCoordinates(NamedTuple):
    """``[Omega] = p [ref] + q [prime]``; the class is in the cone when ``p > 0``."""

    p: float
    q: float
    in_cone: bool


def cone_coordinates(Omega, ref, prime, bracket_fn=bracket, degenerate_tol=1e-12):
    """Coordinates of ``[Omega]`` in the basis ``([ref], [prime])``.

    ``p = {Omega, prime} / {ref, prime}`` and ``q = {Omega, ref} / {prime, ref}``.
    """
    D = float(bracket_fn(ref, prime))
    if abs(D) <= degenerate_tol * max(bracket_scale(ref, prime), 1e-300):
        raise DegenerateBasisError("reference pair has vanishing bracket")
    p = float(bracket_fn(Omega, prime)) / D
    q = float(bracket_fn(Omega, ref)) / (-D)
    return ConeCoordinates(p, q, bool(p > 0))

