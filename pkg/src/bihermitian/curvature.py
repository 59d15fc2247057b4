"""Bismut Ricci form, Chern Laplacian and line-bundle curvature."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import weight_hessian
from .errors import PositivityError
from .forms import box, is_positive
from .grid import EVAL, ScalarField, minus_array, mixed_array, plus_array, sup_norm


def _require_positive(omega):
    if not is_positive(omega, 0.0):
        raise PositivityError("metric components must be positive")


def log_ratio(omega):
    """``log f_plus - log f_minus``; the weights only add a pluriharmonic term."""
    _require_positive(omega)
    return ScalarField(omega.grid, np.log(omega.plus.values) - np.log(omega.minus.values))


def bismut_ricci(omega, boundary=EVAL):
    """Split part of the Bismut Ricci form, ``-box(log f_plus - log f_minus)``."""
    return -box(log_ratio(omega), boundary)


def chern_laplacian(omega, u, boundary=EVAL):
    """Chern Laplacian ``(i ddbar u ^ omega) / omega^2`` for split metrics.

    With ``omega^2 = 2 f_plus f_minus Theta_plus ^ Theta_minus`` this is
    ``(f_minus P u + f_plus M u) / (2 f_plus f_minus)``.
    """
    _require_positive(omega)
    g = omega.grid
    fp, fm = omega.plus.values, omega.minus.values
    num = fm * plus_array(g, u.values, boundary) + fp * minus_array(g, u.values, boundary)
    return ScalarField(g, num / (2 * fp * fm))


@dataclass(frozen=True)
class MixedResidual:
    """Components of ``i ddbar phi`` for a real function ``phi``.

    Attributes
    ----------
    diag_plus, diag_minus : ScalarField
        ``d_z d_zbar phi`` and ``d_w d_wbar phi``.
    cross : tuple of ScalarField
        Real and imaginary parts of ``d_z d_wbar phi``.
    sup_norm : float
        Largest interior sup norm among the four fields.
    """

    diag_plus: ScalarField
    diag_minus: ScalarField
    cross: tuple
    sup_norm: float


def bundle_potential(omega, p, q):
    """Frame part ``p log f_plus + q log f_minus`` of the bundle log-norm."""
    _require_positive(omega)
    return ScalarField(omega.grid, p * np.log(omega.plus.values)
                       + q * np.log(omega.minus.values))


def ddbar_full(phi, boundary=EVAL):
    """All components of ``i ddbar phi`` as a :class:`MixedResidual`."""
    g = phi.grid
    dp = plus_array(g, phi.values, boundary)
    dm = minus_array(g, phi.values, boundary)
    re, im = mixed_array(g, phi.values, boundary)
    parts = [dp, dm, re, im]
    norm = max(sup_norm(a, g) for a in parts)
    return MixedResidual(ScalarField(g, dp), ScalarField(g, dm),
                         (ScalarField(g, re), ScalarField(g, im)), norm)


def bundle_flatness_residual(omega, p, q, boundary=EVAL):
    """Curvature of the metric ``(f_plus e^W+)^p (f_minus e^W-)^q`` on a real line.

    The bundle is flat exactly when ``phi = p log h_plus + q log h_minus`` is
    pluriharmonic, so every component of ``i ddbar phi`` is returned. The
    weight part is affine in the light-cone variables; its second
    differences are computed explicitly and added rather than dropped.
    """
    res = ddbar_full(bundle_potential(omega, p, q), boundary)
    g = omega.grid
    w_pp, w_mm, w_pm = weight_hessian(g, p, q)
    dp = res.diag_plus.values + w_pp
    dm = res.diag_minus.values + w_mm
    re = res.cross[0].values + w_pm
    im = res.cross[1].values
    norm = max(sup_norm(a, g) for a in (dp, dm, re, im))
    return MixedResidual(ScalarField(g, dp), ScalarField(g, dm),
                         (ScalarField(g, re), ScalarField(g, im)), norm)


def ricci_change_residual(omega, omega_u, boundary=EVAL):
    """``Ric(omega_u) - Ric(omega) + box(log lambda - log eta)`` as a split form.

    ``lambda`` and ``eta`` are the component ratios of ``omega_u`` to
    ``omega``; the combination vanishes identically.
    """
    lam = omega_u.plus.values / omega.plus.values
    eta = omega_u.minus.values / omega.minus.values
    corr = box(ScalarField(omega.grid, np.log(lam) - np.log(eta)), boundary)
    return bismut_ricci(omega_u, boundary) - bismut_ricci(omega, boundary) + corr

