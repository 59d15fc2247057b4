from __future__ import annotations

import numpy as np
import pytest

from bihermitian.acceptance import manufactured_potential, manufactured_rhs
from bihermitian.backends import flat_torus_metric, tricerri_metric
from bihermitian.curvature import bismut_ricci, bundle_flatness_residual
from bihermitian.errors import ConfigurationError, SolverFailure
from bihermitian.forms import box, is_positive
from bihermitian.grid import GridSpec, ScalarField, random_smooth_field
from bihermitian.hopf import k_profile, su_metric
from bihermitian.tma import (SolverOptions, TmaProblem, compatibility_integral,
                             estimates_report, flatten_bundle, lu_identity_residual,
                             prescribe_bismut_ricci, solve_linear, solve_nonlinear)


def _const(grid, c):
    return ScalarField(grid, np.full(grid.shape, c))


# problem validation -----------------------------------------------------------


def test_ellipticity_is_enforced(flat8, torus8):
    F = torus8.zeros()
    with pytest.raises(ConfigurationError):
        TmaProblem(flat8, F, 0.5, -1.0, (1, -1))
    with pytest.raises(ConfigurationError):
        TmaProblem(flat8, F, -0.5, 1.0, (1, -1))
    with pytest.raises(ConfigurationError):
        TmaProblem(flat8, F, 0.5, 1.0, (1, 2))
    # dual problem: p = 1, q = -2 with signs (+, +)
    TmaProblem(flat8, F, 1.0, -2.0, (1, 1))


# linear path --------------------------------------------------------------------


def test_linear_zero_and_constant(flat8, torus8):
    r = solve_linear(flat8, torus8.zeros())
    assert r.xi == 0 and np.max(np.abs(r.u.values)) < 1e-14
    r = solve_linear(flat8, _const(torus8, 0.7))
    assert r.xi == pytest.approx(-0.7, abs=1e-15)
    assert np.max(np.abs(r.u.values)) < 1e-14


def test_linear_manufactured():
    g = GridSpec.torus(12)
    u_star = manufactured_potential(g)
    F = manufactured_rhs(g, u_star, 1.0, 1.0)
    r = solve_linear(flat_torus_metric(g), F)
    assert np.max(np.abs(r.u.values - (u_star - u_star.min()))) < 1e-8
    assert abs(r.xi) < 1e-8
    assert r.u.min() == 0 and is_positive(r.omega_u)


def test_compatibility_integral_changes_sign(flat8, torus8):
    F = random_smooth_field(torus8, 4, 0.5).values
    assert compatibility_integral(flat8, F, -F.max()) <= 0
    assert compatibility_integral(flat8, F, -F.min()) >= 0


# nonlinear path -------------------------------------------------------------------


@pytest.mark.parametrize("p,q,signs", [(0.5, 1.0, (1, -1)), (2.0, 1.0, (1, -1)),
                                       (1.0, -2.0, (1, 1))])
def test_nonlinear_zero_rhs(flat8, torus8, p, q, signs):
    r = solve_nonlinear(TmaProblem(flat8, torus8.zeros(), p, q, signs))
    assert r.xi == 0 and np.max(np.abs(r.u.values)) == 0


def test_dual_problem_constant_rhs(flat8, torus8):
    # u = 0 leaves lambda = eta = 1, so xi absorbs F
    r = solve_nonlinear(TmaProblem(flat8, _const(torus8, 0.3), 1.0, -2.0, (1, 1)))
    assert r.xi == pytest.approx(-0.3, abs=1e-14)
    assert np.max(np.abs(r.u.values)) < 1e-14


def test_nonlinear_manufactured():
    g = GridSpec.torus(8)
    u_star = manufactured_potential(g)
    F = manufactured_rhs(g, u_star, 0.5, 1.0)
    r = solve_nonlinear(TmaProblem(flat_torus_metric(g), F, 0.5, 1.0))
    assert np.max(np.abs(r.u.values - (u_star - u_star.min()))) < 1e-7
    assert abs(r.xi) < 1e-8
    assert r.converged and r.residual <= 1e-11


def test_dual_problem_random_rhs(flat8, torus8):
    F = random_smooth_field(torus8, 8, 0.3)
    pr = TmaProblem(flat8, F, 1.0, -2.0, (1, 1))
    r = solve_nonlinear(pr)
    lam = r.omega_u.plus.values / flat8.plus.values
    eta = r.omega_u.minus.values / flat8.minus.values
    assert np.max(np.abs(np.log(lam) + 2 * np.log(eta) - F.values - r.xi)) < 1e-10


def test_linear_and_nonlinear_agree(flat8, torus8):
    F = random_smooth_field(torus8, 17, 0.5)
    r1 = solve_linear(flat8, F)
    r2 = solve_nonlinear(TmaProblem(flat8, F, 1.0, 1.0))
    assert np.max(np.abs(r1.u.values - r2.u.values)) < 1e-8
    assert abs(r1.xi - r2.xi) < 1e-10


def test_gauge_and_uniqueness(flat8, torus8):
    F = random_smooth_field(torus8, 5, 0.5)
    pr = TmaProblem(flat8, F, 0.5, 1.0)
    ref = solve_nonlinear(pr)
    shifted = solve_nonlinear(pr, initial_guess=ref.u.values + 3.0, initial_xi=ref.xi)
    assert np.max(np.abs(shifted.u.values - ref.u.values)) < 1e-10
    assert abs(shifted.xi - ref.xi) < 1e-12
    # a different admissible starting point
    start = random_smooth_field(torus8, 99, 0.01)
    other = solve_nonlinear(pr, initial_guess=start)
    assert np.max(np.abs(other.u.values - ref.u.values)) < 1e-8
    assert abs(other.xi - ref.xi) < 1e-8
    assert ref.u.min() == 0


def test_path_records_and_monotone_history(flat8, torus8):
    F = random_smooth_field(torus8, 6, 0.8)
    r = solve_nonlinear(TmaProblem(flat8, F, 0.5, 1.0))
    assert len(r.path) == 10 and r.path[-1].t == 1.0
    assert all(s.lambda_min > 0 and s.eta_min > 0 for s in r.path)
    # within each Newton solve the accepted residuals decrease
    hist, pos = r.residual_history, 0
    for step in r.path:
        seg = hist[pos:pos + step.newton_iterations]
        assert all(b < a for a, b in zip(seg, seg[1:]))
        pos += step.newton_iterations


def test_path_failure_reports_state(flat8, torus8):
    F = random_smooth_field(torus8, 6, 0.8)
    opts = SolverOptions(max_newton=1, max_halvings=1)
    with pytest.raises(SolverFailure, match="stalled at t"):
        solve_nonlinear(TmaProblem(flat8, F, 0.5, 1.0), opts)


# estimates ------------------------------------------------------------------------


def test_estimates_trivial_solution(flat8, torus8):
    pr = TmaProblem(flat8, torus8.zeros(), 0.5, 1.0)
    verdicts = {v.name: v for v in estimates_report(pr, solve_nonlinear(pr))}
    assert all(v.passed for v in verdicts.values())
    assert verdicts["xi_bound"].slack == 0.0
    lap = verdicts["laplacian_lower_bound"]
    assert lap.slack == pytest.approx(-lap.bound)


def test_lu_identity_detects_corruption(flat8, torus8):
    F = random_smooth_field(torus8, 2, 0.5)
    pr = TmaProblem(flat8, F, 0.5, 1.0)
    r = solve_nonlinear(pr)
    assert lu_identity_residual(pr, r.u.values, r.xi) < 1e-8
    x1 = torus8.mesh()[0]
    bad = r.u.values + 0.01 * np.cos(2 * np.pi * x1)
    assert lu_identity_residual(pr, bad, r.xi) > 1e-4


def test_estimates_need_matching_exponents(flat8, torus8):
    pr = TmaProblem(flat8, torus8.zeros(), 2.0, 1.0)
    with pytest.raises(ConfigurationError):
        estimates_report(pr, solve_nonlinear(pr))


@pytest.mark.parametrize("beta", [0.5, 0.9, 1.0, 1.1, 2.0])
def test_solutions_across_beta(flat8, torus8, beta):
    F = random_smooth_field(torus8, 1, 0.5)
    r = solve_nonlinear(TmaProblem(flat8, F, beta, 1.0))
    assert r.converged and abs(r.xi) <= F.sup(interior=False) + 1e-8


# geometric front-ends ---------------------------------------------------------------


def test_prescribe_ricci():
    g = GridSpec.torus(12)
    x1 = g.mesh()[0]
    G = ScalarField(g, np.broadcast_to(0.1 * np.cos(2 * np.pi * x1), g.shape))
    base = flat_torus_metric(g)
    r = prescribe_bismut_ricci(base, G)
    assert (bismut_ricci(r.omega_u) - box(G)).sup() < 1e-7


def test_prescribe_trivial(flat8, torus8):
    for G in (torus8.zeros(), _const(torus8, 2.5)):
        r = prescribe_bismut_ricci(flat8, G)
        assert np.max(np.abs(r.omega_u.plus.values - 1)) < 1e-13
        assert np.max(np.abs(r.omega_u.minus.values - 1)) < 1e-13


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (2.0, 0.5)])
def test_flatten_tricerri(a, b):
    g = GridSpec.inoue(17, (1.0, 2.0))
    r = flatten_bundle(tricerri_metric(g, a, b), 1, 2)
    assert np.max(np.abs(r.u.values)) == 0
    assert r.xi == pytest.approx(np.log(a * b * b), abs=1e-12)


def test_flatten_hopf_su():
    g = GridSpec.hopf(1.0, 2.0, 64, 8, 4.0)
    om = su_metric(k_profile(1.0, 2.0, g), 0.0)
    before = bundle_flatness_residual(om, 2.0, -1.0).sup_norm
    r = flatten_bundle(om, 2.0, -1.0)
    after = bundle_flatness_residual(r.omega_u, 2.0, -1.0)
    assert before > 0.1 and after.sup_norm < 1e-6
    assert r.extra["flatness_residual"] == after.sup_norm


def test_flatten_hopf_su_oracle():
    # for (beta, -alpha) the reference log-norm has phi'' = (beta - alpha)^2 (1 - 2k) k'
    g = GridSpec.hopf(1.0, 2.0, 257, 8, 4.0)
    prof = k_profile(1.0, 2.0, g)
    om = su_metric(prof, 0.0)
    res = bundle_flatness_residual(om, 2.0, -1.0)
    x = g.axis(0)
    k, kp = prof.k(x), prof.k_prime(x)
    expected = (1 - 2 * k) * kp
    mask = g.interior()[:, 0]
    assert np.max(np.abs(res.diag_plus.values[mask, 0] - expected[mask])) < 1e-6


def test_flatten_guard_rejects_non_global():
    g = GridSpec.hopf(1.0, 2.0, 64, 8, 4.0)
    om = su_metric(k_profile(1.0, 2.0, g), 0.0)
    with pytest.raises(ConfigurationError):
        flatten_bundle(om, 1.0, 1.0)
