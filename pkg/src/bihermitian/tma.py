"""Twisted Monge-Ampere equations ``lambda^p = e^{F + xi} eta^q``.

For a base metric ``omega_0 = (a0, b0)`` and a potential ``u`` the deformed
metric is ``omega_u = (a0 + s_plus P u, b0 + s_minus M u)`` with deformation
signs ``(s_plus, s_minus)``; ``(+1, -1)`` is the box operator and ``(+1, +1)``
the projected ``i ddbar``. The unknowns are ``u`` (up to constants) and the
constant ``xi``; the equation is imposed on logs,

    R(u, xi) = p log lambda - q log eta - F - xi = 0,

with ``lambda = 1 + s_plus P u / a0`` and ``eta = 1 + s_minus M u / b0``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .curvature import bundle_flatness_residual
from .elliptic import gauduchon_density
from .errors import ConfigurationError, PositivityError, SolverFailure
from .forms import SplitForm, is_positive
from .grid import HOPF, ScalarField, integrate
from .linalg import SplitOperator, solve_bordered, split_parts


@dataclass(frozen=True)
class TmaProblem:
    """Data of one twisted Monge-Ampere problem.

    Parameters
    ----------
    base : SplitForm
        Positive base metric.
    F : ScalarField
    p, q : float
        Exponents; ellipticity needs ``p * signs[0] > 0`` and
        ``q * signs[1] < 0``.
    signs : tuple of int
        Deformation signs ``(s_plus, s_minus)``.
    """

    base: SplitForm
    F: ScalarField
    p: float
    q: float
    signs: tuple = (1, -1)

    def __post_init__(self):
        sp_, sm_ = self.signs
        if sp_ not in (1, -1) or sm_ not in (1, -1):
            raise ConfigurationError("deformation signs must be +1 or -1")
        if not (self.p * sp_ > 0 and self.q * sm_ < 0):
            raise ConfigurationError(
                f"not elliptic: need p*s+ > 0 and q*s- < 0, got p={self.p}, q={self.q}, "
                f"signs={self.signs}")
        if self.F.grid != self.base.grid:
            raise ConfigurationError("F and the base metric live on different grids")
        if not is_positive(self.base, 0.0):
            raise PositivityError("base metric must be positive")

    @property
    def grid(self):
        return self.base.grid


@dataclass(frozen=True)
class SolverOptions:
    """Newton / continuity settings.

    ``tol`` bounds the sup norm of the log residual, ``floor`` the smallest
    admissible ``lambda`` and ``eta`` during the line search.
    """

    tol: float = 1e-11
    max_newton: int = 30
    path_steps: int = 10
    floor: float = 1e-8
    max_halvings: int = 8
    max_backtracks: int = 40


@dataclass
class StepRecord:
    """State after one accepted continuity step."""

    t: float
    newton_iterations: int
    residual: float
    xi: float
    lambda_min: float
    lambda_max: float
    eta_min: float
    eta_max: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class SolveReport:
    """Outcome of a solve.

    ``u`` is gauged to ``min u = 0``. ``residual_history`` lists the log
    residual after every accepted Newton step of the whole path.
    """

    u: ScalarField
    xi: float
    omega_u: SplitForm
    residual: float
    converged: bool
    method: str
    residual_history: list = field(default_factory=list)
    path: list = field(default_factory=list)
    newton_iterations: int = 0
    linear_solves: int = 0
    wall_time: float = 0.0
    verdicts: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        """JSON-ready summary without timing information."""
        return {
            "xi": self.xi,
            "residual": self.residual,
            "converged": self.converged,
            "method": self.method,
            "newton_iterations": self.newton_iterations,
            "linear_solves": self.linear_solves,
            "residual_history": list(self.residual_history),
            "path": [s.to_dict() for s in self.path],
            "u_min": self.u.min(),
            "u_max": self.u.max(),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "extra": dict(self.extra),
        }


# ---------------------------------------------------------------------------
# residual pieces


def _ratios(problem, u):
    a0, b0 = problem.base.plus.values, problem.base.minus.values
    sp_, sm_ = problem.signs
    pu, mu = split_parts(problem.grid, u)
    shape = problem.grid.shape
    lam = 1.0 + sp_ * pu.reshape(shape) / a0
    eta = 1.0 + sm_ * mu.reshape(shape) / b0
    return lam, eta


def _residual(problem, lam, eta, F, xi):
    return problem.p * np.log(lam) - problem.q * np.log(eta) - F - xi


def deformed_metric(problem, u):
    """``omega_u`` assembled from the solver discretisation."""
    lam, eta = _ratios(problem, np.asarray(u))
    return SplitForm(ScalarField(problem.grid, problem.base.plus.values * lam),
                     ScalarField(problem.grid, problem.base.minus.values * eta))


def _newton(problem, F, u, xi, opts, history, counters):
    """Damped Newton at fixed ``F``; returns ``(u, xi, residual, iterations)``."""
    grid = problem.grid
    a0, b0 = problem.base.plus.values, problem.base.minus.values
    sp_, sm_ = problem.signs
    w = grid.weights()
    row = w / np.sum(w)
    lam, eta = _ratios(problem, u)
    if lam.min() < opts.floor or eta.min() < opts.floor:
        raise SolverFailure("initial state violates the positivity floor")
    R = _residual(problem, lam, eta, F, xi)
    rnorm = float(np.max(np.abs(R)))
    for it in range(opts.max_newton + 1):
        if rnorm <= opts.tol:
            return u, xi, rnorm, it
        if it == opts.max_newton:
            break
        cp = problem.p * sp_ / (lam * a0)
        cm = -problem.q * sm_ / (eta * b0)
        du, dxi, _ = solve_bordered(SplitOperator(grid, cp, cm), -1.0, row, -R)
        counters["linear"] += 1
        step = 1.0
        for _ in range(opts.max_backtracks):
            u_new, xi_new = u + step * du, xi + step * dxi
            lam_n, eta_n = _ratios(problem, u_new)
            if lam_n.min() >= opts.floor and eta_n.min() >= opts.floor:
                R_n = _residual(problem, lam_n, eta_n, F, xi_new)
                r_n = float(np.max(np.abs(R_n)))
                if r_n < rnorm or r_n <= opts.tol:
                    break
            step *= 0.5
        else:
            raise SolverFailure(f"line search failed at residual {rnorm:.3e}", history)
        u, xi, lam, eta, R, rnorm = u_new, xi_new, lam_n, eta_n, R_n, r_n
        history.append(rnorm)
        counters["newton"] += 1
    raise SolverFailure(f"Newton did not converge (residual {rnorm:.3e})", history)


def solve_nonlinear(problem, options=None, initial_guess=None, initial_xi=0.0):
    """Continuity method along ``F_t = t F`` with Newton corrections.

    Parameters
    ----------
    problem : TmaProblem
    options : SolverOptions, optional
    initial_guess : ScalarField or ndarray, optional
        Starting potential (must keep ``lambda, eta`` above the floor).
    initial_xi : float

    Returns
    -------
    SolveReport

    Raises
    ------
    SolverFailure
        When step halving along the path is exhausted; the message carries
        the last accepted ``t``.
    """
    opts = options or SolverOptions()
    start = time.perf_counter()
    grid = problem.grid
    F = problem.F.values
    if initial_guess is None:
        u = np.zeros(grid.shape)
    else:
        u = np.array(initial_guess.values if isinstance(initial_guess, ScalarField)
                     else initial_guess, dtype=float)
    xi = float(initial_xi)
    history, path = [], []
    counters = {"newton": 0, "linear": 0}
    t, dt, halvings = 0.0, 1.0 / opts.path_steps, 0
    while t < 1.0:
        t_try = t + dt
        if t_try > 1.0 - 1e-12:
            t_try = 1.0
        try:
            u_n, xi_n, r, its = _newton(problem, t_try * F, u, xi, opts, history, counters)
        except SolverFailure as exc:
            halvings += 1
            if halvings > opts.max_halvings:
                raise SolverFailure(f"continuity path stalled at t = {t:.6f}: {exc}",
                                    history) from exc
            dt *= 0.5
            continue
        u, xi, t = u_n, xi_n, t_try
        lam, eta = _ratios(problem, u)
        path.append(StepRecord(t, its, r, xi, float(lam.min()), float(lam.max()),
                               float(eta.min()), float(eta.max())))
    u = u - u.min()
    omega_u = deformed_metric(problem, u)
    lam, eta = _ratios(problem, u)
    res = float(np.max(np.abs(_residual(problem, lam, eta, F, xi))))
    return SolveReport(ScalarField(grid, u), float(xi), omega_u, res, res <= opts.tol,
                       "newton-continuation", history, path, counters["newton"],
                       counters["linear"], time.perf_counter() - start)


# ---------------------------------------------------------------------------
# linear case by bisection on xi


def compatibility_integral(base, F, xi):
    """``int e^f (e^{F+xi} - 1) omega_0^2`` with ``f`` the Gauduchon factor of
    ``(e^{F+xi} a0, b0)``."""
    a0, b0 = base.plus.values, base.minus.values
    E = np.exp(F + xi)
    tilde = SplitForm(ScalarField(base.grid, E * a0), base.minus)
    psi, _ = gauduchon_density(tilde)
    return integrate(psi * (E - 1.0) * 2 * a0 * b0, base.grid)


def solve_linear(base, F, tol=1e-11, compat_tol=1e-8):
    """Solve ``lambda = e^{F + xi} eta`` for box deformations.

    ``xi`` is the root of :func:`compatibility_integral` on
    ``[-sup F, -inf F]`` (the integral is non-positive at the left end and
    non-negative at the right end). For that ``xi`` the equation is a
    Chern-Poisson problem for the metric ``(e^{F+xi} a0, b0)``.
    """
    start = time.perf_counter()
    grid = base.grid
    Fv = np.asarray(F.values if isinstance(F, ScalarField) else F, dtype=float)
    a0, b0 = base.plus.values, base.minus.values
    lo, hi = -float(Fv.max()), -float(Fv.min())
    evals = {"n": 0}

    def integral(x):
        evals["n"] += 1
        return compatibility_integral(base, Fv, x)

    if hi - lo <= 1e-14 * max(1.0, abs(lo)):
        xi = 0.5 * (lo + hi)
    else:
        f_lo, f_hi = integral(lo), integral(hi)
        if f_lo > 0 or f_hi < 0:
            raise SolverFailure(f"compatibility integral has no sign change on [{lo}, {hi}]")
        if f_lo == 0:
            xi = lo
        elif f_hi == 0:
            xi = hi
        else:
            xi = brentq(integral, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    E = np.exp(Fv + xi)
    w = grid.weights()
    op = SplitOperator(grid, b0, E * a0)
    u, mu, _ = solve_bordered(op, 2 * E * a0 * b0, w / np.sum(w), (E - 1.0) * a0 * b0)
    if abs(mu) > compat_tol:
        raise SolverFailure(f"linear solve left incompatibility {mu:.3e}")
    u = u - u.min()
    problem = TmaProblem(base, ScalarField(grid, Fv), 1.0, 1.0, (1, -1))
    lam, eta = _ratios(problem, u)
    if lam.min() <= 0 or eta.min() <= 0:
        raise PositivityError("linear solution is not positive")
    res = float(np.max(np.abs(_residual(problem, lam, eta, Fv, xi))))
    report = SolveReport(ScalarField(grid, u), float(xi), deformed_metric(problem, u), res,
                         res <= tol, "bisection-linear", [res], [], 0, evals["n"] + 1,
                         time.perf_counter() - start)
    report.extra["compatibility_integral"] = float(integral(xi)) if evals["n"] else 0.0
    report.extra["multiplier"] = float(mu)
    return report


def prescribe_bismut_ricci(base, G, tol=1e-11):
    """Metric ``omega_u`` with ``Ric(omega_u) = Ric(omega_0) + box G``.

    Since ``Ric(omega_u) = Ric(omega_0) - box(log lambda - log eta)``, this is
    the linear problem with ``F = -G``.
    """
    return solve_linear(base, -np.asarray(G.values if isinstance(G, ScalarField) else G),
                        tol=tol)


# ---------------------------------------------------------------------------
# flat line bundles


def bundle_reference(base, p, q):
    """Log-norm ``p log h_plus + q log h_minus`` of the base metric.

    On Hopf grids the weight part ``-(p alpha + q beta) s - (p alpha - q beta) x / 2``
    (plus a constant) must not depend on ``s``; otherwise the norm is not a
    function on the surface and a :class:`ConfigurationError` is raised.
    """
    grid = base.grid
    phi = p * np.log(base.plus.values) + q * np.log(base.minus.values)
    if grid.kind == HOPF:
        a, b = grid.alpha, grid.beta
        if abs(p * a + q * b) > 1e-12 * (abs(p * a) + abs(q * b)):
            raise ConfigurationError(
                f"exponents ({p}, {q}) give a weight depending on s; need p*alpha + q*beta = 0")
        # s-parts cancel; keep the x-dependence and the constant
        x, _ = grid.mesh()
        const = p * (-np.log(a * a)) + q * (-np.log(b * b))
        phi = phi + const - 0.5 * (p * a - q * b) * x
    return phi


def flatten_bundle(base, p, q, options=None, certify_tol=None):
    """Deform ``base`` so the induced metric ``h_plus^p h_minus^q`` is flat.

    The exponents of the Monge-Ampere problem are ``(p, -q)`` with signs
    ``(sign p, sign q)``, and ``F = -(phi_0 - c_0)`` where ``phi_0`` is
    :func:`bundle_reference` and ``c_0`` its mean. After the solve
    ``phi_u = c_0 + xi`` is constant; that constant is stored in
    ``report.extra["log_norm"]`` and also replaces ``report.xi``.
    """
    if p == 0 or q == 0:
        raise ConfigurationError("flatness exponents must be non-zero")
    grid = base.grid
    phi0 = bundle_reference(base, p, q)
    w = grid.weights()
    c0 = float(np.sum(phi0 * w) / np.sum(w))
    F = ScalarField(grid, -(phi0 - c0))
    signs = (int(np.sign(p)), int(np.sign(q)))
    problem = TmaProblem(base, F, p, -q, signs)
    report = solve_nonlinear(problem, options)
    flat = bundle_flatness_residual(report.omega_u, p, q)
    tma_xi = report.xi
    report = replace(report, xi=c0 + tma_xi, method="flatten-" + report.method)
    report.extra.update({"log_norm": c0 + tma_xi, "tma_xi": tma_xi,
                         "reference_mean": c0, "flatness_residual": flat.sup_norm,
                         "exponents": [p, q], "signs": list(signs)})
    if certify_tol is not None and flat.sup_norm > certify_tol:
        raise SolverFailure(f"flatness residual {flat.sup_norm:.3e} above {certify_tol:.1e}")
    return report


# ---------------------------------------------------------------------------
# a priori estimate diagnostics


@dataclass
class Verdict:
    """One estimate check: ``passed`` when ``value`` respects ``bound``."""

    name: str
    passed: bool
    value: float
    bound: float
    slack: float
    note: str = ""

    def to_dict(self):
        return dict(self.__dict__)


def lu_identity_residual(problem, u, xi):
    """Sup of ``-L u - (beta/lambda - e^{F+xi}/lambda^beta + 1 - beta)``.

    ``L`` is the linearisation at ``u``: ``beta P/(lambda a0) + M/(eta b0)``.
    """
    a0, b0 = problem.base.plus.values, problem.base.minus.values
    beta = problem.p
    lam, eta = _ratios(problem, u)
    pu, mu = split_parts(problem.grid, u)
    shape = problem.grid.shape
    Lu = beta * pu.reshape(shape) / (lam * a0) + mu.reshape(shape) / (eta * b0)
    rhs = beta / lam - np.exp(problem.F.values + xi) / lam ** beta + (1 - beta)
    return float(np.max(np.abs(-Lu - rhs)))


def estimates_report(problem, report, lu_tol=1e-8, slack_tol=1e-8):
    """Check the a priori estimates on a converged solution.

    Checks ``|xi| <= sup|F|``, the lower Laplacian bound
    ``lambda - eta >= -(1-beta) C^{1/(1-beta)}`` with ``C = sup e^{F+xi}``
    (the constant bounding ``eta <= C' lambda^beta`` is ``C' = sup e^{-(F+xi)}``;
    that variant is reported as well), the exact linearisation identity, and
    records positivity and sup/L1 diagnostics.

    Returns
    -------
    list of Verdict
    """
    if not (0 < problem.p < 1 and problem.q == 1 and tuple(problem.signs) == (1, -1)):
        raise ConfigurationError("estimate checks need p in (0, 1), q = 1, signs (+, -)")
    beta = problem.p
    u, xi = report.u.values, report.xi
    F = problem.F.values
    grid = problem.grid
    lam, eta = _ratios(problem, u)
    out = []
    supF = float(np.max(np.abs(F)))
    out.append(Verdict("xi_bound", abs(xi) <= supF + slack_tol, abs(xi), supF,
                       supF - abs(xi)))
    lap = float(np.min(lam - eta))
    for name, C in (("laplacian_lower_bound", float(np.max(np.exp(F + xi)))),
                    ("laplacian_lower_bound_proof_constant", float(np.max(np.exp(-(F + xi)))))):
        bound = -(1 - beta) * C ** (1 / (1 - beta))
        out.append(Verdict(name, lap >= bound - slack_tol, lap, bound, lap - bound,
                           f"C = {C:.6g}"))
    lu = lu_identity_residual(problem, u, xi)
    out.append(Verdict("lu_identity", lu < lu_tol, lu, lu_tol, lu_tol - lu))
    out.append(Verdict("lambda_positive", bool(lam.min() > 0), float(lam.min()), 0.0,
                       float(lam.min())))
    out.append(Verdict("eta_positive", bool(eta.min() > 0), float(eta.min()), 0.0,
                       float(eta.min())))
    l1 = integrate(np.abs(u), grid) / integrate(np.ones(grid.shape), grid)
    sup_u = float(np.max(u))
    out.append(Verdict("sup_over_l1", True, sup_u / l1 if l1 > 0 else 0.0, np.inf, np.inf,
                       f"sup u = {sup_u:.6g}, mean |u| = {l1:.6g} (recorded only)"))
    return out
