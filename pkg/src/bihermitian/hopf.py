"""Streets-Ustinovskiy metrics on diagonal Hopf surfaces.

The profile ``k: R -> (0, 1)`` solves ``k' = k(1-k)[(beta-alpha)k + alpha]``
with ``k(0) = 1/2``. It is integrated in logit form ``L = log(k/(1-k))``,
``L' = (beta-alpha) k + alpha``, which keeps ``1 - k`` accurate in the
right tail. The metric ``omega_t`` has frame components
``(k(x+t), 1-k(x+t))`` and its ``t``-derivative ``omega'`` has components
``(k', -k')``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import expit

from .cohomology import cone_coordinates, realize_proportional, require_pluriclosed
from .curvature import bismut_ricci
from .errors import ConfigurationError, NotInConeError, PositivityError, SolverFailure
from .forms import BracketValue, SplitForm, box, bracket, is_positive
from .grid import HOPF, NEUMANN, ScalarField

# Ric(omega_t) = SOLITON_SIGN * (beta - alpha) * omega'_t, fixed by direct
# evaluation of -box(log k - log(1-k)): L'' = (beta-alpha) k'.
SOLITON_SIGN = -1.0


def implicit_position(L, alpha, beta):
    """Closed-form inverse of the profile: the ``x`` at which the logit is ``L``.

    Separating variables in the profile equation gives
    ``log k / alpha - log(1-k) / beta - (beta-alpha)/(alpha beta) log((beta-alpha)k + alpha)``
    equal to ``x`` plus its value at ``k = 1/2``.
    """
    L = np.asarray(L, dtype=float)
    log_k = -np.logaddexp(0.0, -L)
    log_1mk = -np.logaddexp(0.0, L)
    k = expit(L)
    d = beta - alpha

    def G(lk, l1k, kk):
        return lk / alpha - l1k / beta - d / (alpha * beta) * np.log(d * kk + alpha)

    half = np.log(0.5)
    return G(log_k, log_1mk, k) - G(half, half, 0.5)


@dataclass(frozen=True)
class KProfile:
    """Solution of the profile equation, sampled on a Hopf grid.

    Off the integration interval the logit is continued linearly with the
    limiting slopes ``alpha`` (left) and ``beta`` (right).
    """

    alpha: float
    beta: float
    grid: object
    reach: float
    offset: float = 0.0
    _dense: object = field(default=None, repr=False, compare=False)

    def logit(self, x):
        x = np.asarray(x, dtype=float)
        R = self.reach
        inside = np.clip(x, -R, R)
        L = self._dense(inside)
        L = np.where(x > R, self._dense(R) + self.beta * (x - R), L)
        L = np.where(x < -R, self._dense(-R) + self.alpha * (x + R), L)
        return L

    def k(self, x):
        return expit(self.logit(x))

    def one_minus_k(self, x):
        return expit(-self.logit(x))

    def k_prime(self, x):
        L = self.logit(x)
        k = expit(L)
        return k * expit(-L) * ((self.beta - self.alpha) * k + self.alpha)

    def ode_residual(self, x=None):
        """Max ``|G(L(x)) - x|`` over ``x`` (the grid by default)."""
        if x is None:
            x = self.grid.axis(0)
        return float(np.max(np.abs(implicit_position(self.logit(x), self.alpha, self.beta) - x)))

    def samples(self):
        return self.k(self.grid.axis(0) + self.offset)


def _logit_rhs(alpha, beta):
    def rhs(_x, L):
        return (beta - alpha) * expit(L) + alpha
    return rhs


def k_profile(alpha, beta, grid, rtol=1e-13, atol=1e-13, margin=None):
    """Integrate the profile with adaptive Runge-Kutta 4(5) outward from ``x = 0``.

    Parameters
    ----------
    alpha, beta : float
        Positive moduli; must match the grid.
    grid : GridSpec
        Hopf grid; the integration reaches past its ends by ``margin``.
    margin : float, optional
        Extra reach for shifted profiles (default ``X + 10``).

    Raises
    ------
    SolverFailure
        If the integrator fails (step-size underflow).
    """
    if not (alpha > 0 and beta > 0):
        raise ConfigurationError("Hopf moduli must be positive")
    if grid.kind != HOPF or not (np.isclose(grid.alpha, alpha) and np.isclose(grid.beta, beta)):
        raise ConfigurationError("profile moduli do not match the Hopf grid")
    X = grid.half_width
    reach = X + (X + 10.0 if margin is None else margin)
    rhs = _logit_rhs(alpha, beta)
    sols = []
    for end in (reach, -reach):
        sol = solve_ivp(rhs, (0.0, end), [0.0], method="RK45", rtol=rtol, atol=atol,
                        dense_output=True)
        if sol.status != 0:
            raise SolverFailure(f"profile integration failed: {sol.message}")
        sols.append(sol.sol)
    right, left = sols

    def dense(x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        out = np.empty_like(flat)
        pos = flat >= 0
        if pos.any():
            out[pos] = right(flat[pos])[0]
        if not pos.all():
            out[~pos] = left(flat[~pos])[0]
        return out.reshape(x.shape) if x.ndim else float(out[0])

    return KProfile(float(alpha), float(beta), grid, float(reach), 0.0, dense)


def _on_grid(profile, values):
    g = profile.grid
    return ScalarField(g, np.broadcast_to(values[:, None], g.shape))


def su_metric(profile, t=0.0):
    """Streets-Ustinovskiy metric ``omega_t`` with components ``(k(x+t), 1-k(x+t))``."""
    x = profile.grid.axis(0) + t
    return SplitForm(_on_grid(profile, profile.k(x)), _on_grid(profile, profile.one_minus_k(x)))


def su_prime(profile, t=0.0):
    """``d omega_t / dt`` with components ``(k'(x+t), -k'(x+t))``."""
    kp = profile.k_prime(profile.grid.axis(0) + t)
    return SplitForm(_on_grid(profile, kp), _on_grid(profile, -kp))


def soliton_residual(profile, t=0.0, sign=SOLITON_SIGN):
    """Interior sup of ``Ric(omega_t) - sign (beta - alpha) omega'_t``."""
    ric = bismut_ricci(su_metric(profile, t))
    d = profile.beta - profile.alpha
    return (ric - su_prime(profile, t) * (sign * d)).sup()


def soliton_sign(profile, t=0.0):
    """Sign that makes the soliton identity hold, measured on the grid."""
    r_plus = soliton_residual(profile, t, 1.0)
    r_minus = soliton_residual(profile, t, -1.0)
    return 1.0 if r_plus < r_minus else -1.0


def hopf_bracket(eta, gamma, tails=True):
    """Bracket on a Hopf grid with exponential tail corrections.

    Past the truncation ends the integrand is modelled as decaying like
    ``exp(alpha x)`` on the left and ``exp(-beta x)`` on the right, the
    rates at which the profile approaches its limits, so each end adds its
    ``s``-averaged end value divided by the rate.
    """
    base = bracket(eta, gamma)
    g = eta.grid
    if not tails or g.kind != HOPF:
        return base
    integrand = (eta.plus.values * gamma.minus.values
                 - eta.minus.values * gamma.plus.values)
    s_len = g.hi[1] - g.lo[1]
    left = np.mean(integrand[0]) * s_len / g.alpha
    right = np.mean(integrand[-1]) * s_len / g.beta
    tail = 4 * np.pi ** 2 / (g.alpha * g.beta) * (left + right)
    return BracketValue(base.value + tail, base.error + abs(tail))


def bracket_constant(alpha, beta):
    """``8 pi^2 / (alpha beta)``."""
    return 8 * np.pi ** 2 / (alpha * beta)


class BracketRow(NamedTuple):
    t: float
    bracket_omega: float
    expected_omega: float
    bracket_prime: float
    rel_err_omega: float
    rel_err_prime_abs: float


def hopf_bracket_constants(profile, t_values=(-1.0, 0.5, 2.0)):
    """Measure ``{omega_t, omega}`` and ``{omega_t, omega'}`` against ``c``.

    Returns
    -------
    c : float
        ``8 pi^2 / (alpha beta)``.
    rows : list of BracketRow
        ``rel_err_omega`` compares with ``c t``; ``rel_err_prime_abs``
        compares ``|{omega_t, omega'}|`` with ``c``. The measured sign of
        ``{omega_t, omega'}`` is negative, as forced by antisymmetry and
        ``{omega', omega} = c``.
    """
    c = bracket_constant(profile.alpha, profile.beta)
    om, omp = su_metric(profile, 0.0), su_prime(profile, 0.0)
    rows = []
    for t in t_values:
        wt = su_metric(profile, t)
        b1 = hopf_bracket(wt, om).value
        b2 = hopf_bracket(wt, omp).value
        e1 = abs(b1 - c * t) / abs(c * t) if t != 0 else abs(b1) / c
        rows.append(BracketRow(float(t), float(b1), float(c * t), float(b2),
                               float(e1), float(abs(abs(b2) - c) / c)))
    return c, rows


class Projection(NamedTuple):
    """``Omega + box u = s omega_t`` with its residual."""

    s: float
    t: float
    u: ScalarField
    residual: float
    c: float


def project_to_su(Omega, profile, compat_tol=1e-6, require_positive=True):
    """Deform a positive pluriclosed metric into a multiple of some ``omega_t``.

    The class coordinates ``p, q`` in the basis ``([omega], [omega'])`` give
    ``s = p`` and ``t = q / p``; the potential comes from
    :func:`realize_proportional` against ``omega_t``. With
    ``require_positive=False`` the positivity gate is skipped so that any
    pluriclosed form can be tested for cone membership.

    Raises
    ------
    NotInConeError
        If ``p <= 0``.
    """
    if require_positive and not is_positive(Omega, 0.0):
        raise PositivityError("Omega must be positive")
    require_pluriclosed(Omega, name="Omega")
    om, omp = su_metric(profile, 0.0), su_prime(profile, 0.0)
    coords = cone_coordinates(Omega, om, omp, bracket_fn=hopf_bracket)
    if not coords.in_cone:
        raise NotInConeError(f"class has p = {coords.p:.6e} <= 0")
    s, t = coords.p, coords.q / coords.p
    target = su_metric(profile, t)
    real = realize_proportional(Omega, target, compat_tol=compat_tol, bracket_fn=hopf_bracket)
    resid = (Omega + box(real.u, NEUMANN) - target * s).sup()
    return Projection(float(s), float(t), real.u, float(resid), real.c)
