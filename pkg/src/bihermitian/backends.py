"""Concrete charts, reference frames and named metric fixtures.

Every split form is stored as two component fields ``(f_plus, f_minus)``
against reference forms ``Theta_plus``, ``Theta_minus``:

========  =============================  =============================
kind      Theta_plus                     Theta_minus
========  =============================  =============================
torus4d   i dz^dzbar                     i dw^dwbar
hopf      i dz^dzbar / (alpha^2 |z|^2)   i dw^dwbar / (beta^2 |w|^2)
inoue     i dz^dzbar                     i dw^dwbar
========  =============================  =============================

The weight potentials ``W_plus, W_minus`` are the logs of the frame
densities against the flat forms, so the true metric coefficient of
``f_plus Theta_plus`` is ``f_plus * exp(W_plus)``.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, PositivityError
from .grid import HOPF, INOUE, TORUS, GridSpec, ScalarField
from .forms import SplitForm

FRAMES = {
    TORUS: ("i dz^dzbar", "i dw^dwbar"),
    HOPF: ("i dz^dzbar/(alpha^2|z|^2)", "i dw^dwbar/(beta^2|w|^2)"),
    INOUE: ("i dz^dzbar", "i dw^dwbar"),
}


def hopf_light_cone(grid):
    """Light-cone coordinates ``mu = s + x/2`` and ``nu = s - x/2``."""
    x, s = grid.mesh()
    return s + 0.5 * x, s - 0.5 * x


def weight_potentials(grid):
    """Weight potentials ``(W_plus, W_minus)`` of the reference frames.

    On a Hopf surface ``|z|^2 = exp(alpha mu)`` and ``|w|^2 = exp(beta nu)``
    along the chart, so ``W_plus = -log alpha^2 - alpha mu`` and
    ``W_minus = -log beta^2 - beta nu``. These are not periodic in ``s``;
    they are never differentiated spectrally.
    """
    if grid.kind != HOPF:
        return grid.zeros(), grid.zeros()
    mu, nu = hopf_light_cone(grid)
    a, b = grid.alpha, grid.beta
    wp = -np.log(a * a) - a * mu
    wm = -np.log(b * b) - b * nu
    return ScalarField(grid, wp), ScalarField(grid, wm)


def weight_combination(grid, p, q):
    """Value of ``p W_plus + q W_minus`` as an explicit function.

    Returns a callable of ``(x, s)`` on Hopf grids (and a constant zero
    callable elsewhere), so callers can evaluate it off-grid when testing
    second differences.
    """
    if grid.kind != HOPF:
        return lambda *coords: 0.0 * coords[0]
    a, b = grid.alpha, grid.beta

    def weight(x, s):
        mu, nu = s + 0.5 * x, s - 0.5 * x
        return p * (-np.log(a * a) - a * mu) + q * (-np.log(b * b) - b * nu)

    return weight


def weight_hessian(grid, p, q):
    """Second derivatives of ``p W_plus + q W_minus`` in the split directions.

    The weights are affine in ``(mu, nu)``, so every second derivative
    vanishes. Rather than assume it, evaluate centred second differences of
    the exact function with the grid steps and return the three components
    ``(d_mu^2, d_nu^2, d_mu d_nu)`` as raw arrays. They come out at roundoff.
    """
    if grid.kind != HOPF:
        z = np.zeros(grid.shape)
        return z, z.copy(), z.copy()
    W = weight_combination(grid, p, q)
    x, s = grid.mesh()
    x = np.broadcast_to(x, grid.shape)
    s = np.broadcast_to(s, grid.shape)
    h = grid.spacing(0)
    # step along mu: (dx, ds) = (h, h/2); along nu: (-h, h/2)
    def second(dx, ds):
        return (W(x + dx, s + ds) - 2 * W(x, s) + W(x - dx, s - ds)) / h ** 2

    d_mumu = second(h, 0.5 * h)
    d_nunu = second(-h, 0.5 * h)
    d_munu = (W(x + 0, s + h) - W(x + h, s + 0.5 * h) - W(x - h, s + 0.5 * h)
              + W(x, s)) / h ** 2
    return d_mumu, d_nunu, d_munu


def weight_closure_constant(grid):
    """``beta W_plus - alpha W_minus + alpha beta x`` on a Hopf grid.

    This combination is constant, equal to ``-beta log alpha^2 + alpha log
    beta^2``; it is what makes the flat-bundle norm globally defined.
    """
    wp, wm = weight_potentials(grid)
    x, _ = grid.mesh()
    a, b = grid.alpha, grid.beta
    return ScalarField(grid, b * wp.values - a * wm.values + a * b * x)


# ---------------------------------------------------------------------------
# fixtures


def flat_torus_metric(grid):
    """The flat product metric with components ``(1, 1)``."""
    if grid.kind != TORUS:
        raise ConfigurationError("flat torus metric needs a torus4d grid")
    return SplitForm(grid.ones(), grid.ones())


def tricerri_metric(grid, a=1.0, b=1.0):
    """Tricerri metric ``a i dz dzbar / y^2 + b y i dw dwbar`` on an Inoue strip."""
    if grid.kind != INOUE:
        raise ConfigurationError("Tricerri metric needs an inoue grid")
    if not (a > 0 and b > 0):
        raise PositivityError("Tricerri parameters must be positive")
    y = grid.axis(0)
    return SplitForm(ScalarField(grid, a / y ** 2), ScalarField(grid, b * y))


def make_grid(kind, sizes=None, **params):
    """Build a grid from a kind name and keyword parameters (config helper)."""
    if kind == TORUS:
        return GridSpec.torus(sizes if sizes is not None else 12,
                              params.get("periods", (1.0, 1.0, 1.0, 1.0)))
    if kind == HOPF:
        nx, ns = sizes if sizes is not None else (1024, 32)
        return GridSpec.hopf(params.get("alpha", 1.0), params.get("beta", 1.0),
                             nx, ns, params.get("half_width"))
    if kind == INOUE:
        ny = sizes[0] if sizes is not None else 65
        return GridSpec.inoue(ny, tuple(params.get("y_range", (0.5, 2.0))))
    raise ConfigurationError(f"unknown backend kind {kind!r}")
