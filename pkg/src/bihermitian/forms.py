"""Split-type forms and their algebra.

A split form ``f_plus Theta_plus + f_minus Theta_minus`` is stored as the
pair of component fields. The box operator, the projected ``i ddbar``, the
involution and the bracket pairing all act on these pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError
from .grid import (EVAL, ScalarField, integrate, minus_array,
                   plus_array, sup_norm)


@dataclass(frozen=True)
class SplitForm:
    """Real split (1,1)-form ``plus * Theta_plus + minus * Theta_minus``."""

    plus: ScalarField
    minus: ScalarField

    def __post_init__(self):
        if self.plus.grid != self.minus.grid:
            raise GridMismatchError("components live on different grids")

    @classmethod
    def from_arrays(cls, grid, plus, minus):
        return cls(ScalarField(grid, plus), ScalarField(grid, minus))

    @property
    def grid(self):
        return self.plus.grid

    def _check(self, other):
        if other.grid != self.grid:
            raise GridMismatchError("forms live on different grids")

    def __add__(self, other):
        if not isinstance(other, SplitForm):
            return NotImplemented
        self._check(other)
        return SplitForm(self.plus + other.plus, self.minus + other.minus)

    def __sub__(self, other):
        if not isinstance(other, SplitForm):
            return NotImplemented
        self._check(other)
        return SplitForm(self.plus - other.plus, self.minus - other.minus)

    def __neg__(self):
        return SplitForm(-self.plus, -self.minus)

    def __mul__(self, factor):
        """Scale by a number or a scalar field (conformal change)."""
        if isinstance(factor, SplitForm):
            return NotImplemented
        return SplitForm(self.plus * factor, self.minus * factor)

    __rmul__ = __mul__

    def sup(self, interior=True):
        return max(sup_norm(self.plus, interior=interior),
                   sup_norm(self.minus, interior=interior))

    def volume_density(self):
        """Density of ``omega^2`` against ``Theta_plus ^ Theta_minus``."""
        return 2.0 * self.plus * self.minus


@dataclass(frozen=True)
class BracketValue:
    """Bracket pairing with a quadrature error estimate.

    ``error`` is the gap between the full-grid and the every-other-point
    quadrature of the same integrand.
    """

    value: float
    error: float

    def __float__(self):
        return float(self.value)


def box(u, boundary=EVAL):
    """Box operator ``i(d+ dbar+ - d- dbar-) u`` as a split form."""
    g = u.grid
    return SplitForm.from_arrays(g, plus_array(g, u.values, boundary),
                                 -minus_array(g, u.values, boundary))


def pi_ddbar(u, boundary=EVAL):
    """Split projection of ``i ddbar u``; equals ``involution(box(u))``."""
    g = u.grid
    return SplitForm.from_arrays(g, plus_array(g, u.values, boundary),
                                 minus_array(g, u.values, boundary))


def involution(eta):
    """Flip the sign of the minus component."""
    return SplitForm(eta.plus, -eta.minus)


def _coarse_integral(arr, grid):
    """Every-other-point quadrature, for the bracket error estimate."""
    out = np.asarray(arr, dtype=float)
    # reduce from the last axis so earlier axis numbers stay valid
    for a in reversed(range(grid.ndim)):
        n = grid.sizes[a]
        idx = np.arange(0, n, 2)
        if grid.periodic[a]:
            out = (np.sum(np.take(out, idx, axis=a), axis=a)
                   * (grid.hi[a] - grid.lo[a]) / len(idx))
        else:
            if idx[-1] != n - 1:
                idx = np.append(idx, n - 1)
            out = np.trapezoid(np.take(out, idx, axis=a), x=grid.axis(a)[idx], axis=a)
    return float(out)


def _scaled(total, grid):
    # same backend normalisation as grid.integrate
    return integrate(np.ones(grid.shape), grid) / float(np.sum(grid.weights())) * total


def bracket(eta, gamma):
    """Antisymmetric pairing ``{eta, gamma} = int eta+ gamma- - eta- gamma+``.

    The two products are integrated separately and subtracted, so swapping
    the arguments negates the value exactly.
    """
    if eta.grid != gamma.grid:
        raise GridMismatchError("bracket of forms on different grids")
    grid = eta.grid
    first = eta.plus.values * gamma.minus.values
    second = eta.minus.values * gamma.plus.values
    value = integrate(first, grid) - integrate(second, grid)
    coarse = _scaled(_coarse_integral(first, grid), grid) \
        - _scaled(_coarse_integral(second, grid), grid)
    return BracketValue(float(value), float(abs(value - coarse)))


def pluriclosed_field(omega, boundary=EVAL):
    """Cross terms of ``i ddbar omega``: ``M f_plus + P f_minus``.

    On Hopf surfaces the true coefficients are ``f exp(W)``; the weights
    factor out of the cross terms exactly (each weight depends only on the
    light-cone variable that the opposite operator does not see), so the
    residual is reported in frame normalisation.
    """
    g = omega.grid
    return (minus_array(g, omega.plus.values, boundary)
            + plus_array(g, omega.minus.values, boundary))


def pluriclosed_residual(omega, boundary=EVAL):
    """Interior sup norm of :func:`pluriclosed_field`."""
    return sup_norm(pluriclosed_field(omega, boundary), omega.grid)


def boxclosed_residual(omega, boundary=EVAL):
    """Interior sup norm of ``P f_minus - M f_plus`` (the dual closedness)."""
    g = omega.grid
    r = (plus_array(g, omega.minus.values, boundary)
         - minus_array(g, omega.plus.values, boundary))
    return sup_norm(r, g)


def is_positive(omega, floor=0.0):
    """Whether both components exceed ``floor`` at every grid point."""
    if floor < 0:
        raise ValueError("floor must be non-negative")
    return bool(omega.plus.values.min() > floor and omega.minus.values.min() > floor)


def form_scale(omega):
    """Size used to normalise closedness gates."""
    return max(omega.sup(interior=False), 1e-300)
