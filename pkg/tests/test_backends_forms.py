from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bihermitian.backends import (flat_torus_metric, make_grid, tricerri_metric,
                                  weight_closure_constant, weight_hessian, weight_potentials)
from bihermitian.cohomology import conformal_family
from bihermitian.errors import ConfigurationError, PositivityError
from bihermitian.forms import (SplitForm, box, boxclosed_residual, bracket, involution,
                               is_positive, pi_ddbar, pluriclosed_residual)
from bihermitian.grid import NEUMANN, GridSpec, ScalarField, random_smooth_field


# backends ---------------------------------------------------------------------


def test_flat_torus_fixture(torus8):
    om = flat_torus_metric(torus8)
    assert np.all(om.plus.values == 1) and np.all(om.minus.values == 1)
    assert pluriclosed_residual(om) == 0
    with pytest.raises(ConfigurationError):
        flat_torus_metric(GridSpec.inoue(17))


def test_tricerri_values_and_closedness():
    g = GridSpec.inoue(9, (1.0, 2.0))
    om = tricerri_metric(g, 1.0, 1.0)
    # last grid point is y = 2
    assert om.plus.values[-1] == pytest.approx(0.25)
    assert om.minus.values[-1] == pytest.approx(2.0)
    for a, b in ((1.0, 1.0), (2.0, 0.5), (0.3, 7.0)):
        om = tricerri_metric(GridSpec.inoue(17, (1.0, 2.0)), a, b)
        assert pluriclosed_residual(om) < 1e-10
        assert boxclosed_residual(om) < 1e-10
        assert is_positive(om)
    with pytest.raises(PositivityError):
        tricerri_metric(g, -1.0, 1.0)


def test_weight_potentials():
    t = GridSpec.torus(6)
    wp, wm = weight_potentials(t)
    assert wp.sup(False) == 0 and wm.sup(False) == 0
    g = GridSpec.hopf(1.0, 1.0, 65, 8, 2.0)
    wp, wm = weight_potentials(g)
    # the x = 0, s = 0 sample sits at mu = nu = 0
    assert wp.values[32, 0] == pytest.approx(0.0, abs=1e-15)
    assert wm.values[32, 0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("alpha,beta", [(1.0, 2.0), (0.7, 1.3), (3.0, 0.5)])
def test_weight_closure_constant(alpha, beta):
    g = GridSpec.hopf(alpha, beta, 33, 8, 3.0)
    c = weight_closure_constant(g).values
    expected = -beta * np.log(alpha ** 2) + alpha * np.log(beta ** 2)
    assert np.max(np.abs(c - expected)) < 1e-12


def test_weights_are_pluriharmonic(small_hopf):
    for p, q in ((1.0, 0.0), (0.0, 1.0), (2.0, -1.0)):
        for comp in weight_hessian(small_hopf, p, q):
            assert np.max(np.abs(comp)) < 1e-9


def test_make_grid_rejects_unknown():
    with pytest.raises(ConfigurationError):
        make_grid("sphere")


# split forms ------------------------------------------------------------------


def test_box_and_involution(torus8):
    u = random_smooth_field(torus8, 2)
    assert np.array_equal(involution(box(u)).minus.values, pi_ddbar(u).minus.values)
    assert np.array_equal(involution(involution(box(u))).minus.values, box(u).minus.values)


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_bracket_is_antisymmetric(s1, s2):
    g = GridSpec.torus(6)
    a = SplitForm(random_smooth_field(g, s1), random_smooth_field(g, s1 + 1))
    b = SplitForm(random_smooth_field(g, s2 + 7), random_smooth_field(g, s2 + 9))
    assert float(bracket(a, b)) == -float(bracket(b, a))
    assert float(bracket(a, a)) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_bracket_vanishes_on_box_exact(torus8, seed):
    omega = conformal_family(flat_torus_metric(torus8) * np.exp(random_smooth_field(torus8, 50, 0.3)),
                             0.3)
    v = random_smooth_field(torus8, seed)
    assert abs(float(bracket(box(v), omega))) < 1e-12


def test_bracket_vanishes_on_box_exact_hopf(hopf_profile):
    from bihermitian.hopf import su_metric
    g = hopf_profile.grid
    v = random_smooth_field(g, 3, amplitude=0.01, taper_width=1.5)
    assert abs(float(bracket(box(v, NEUMANN), su_metric(hopf_profile, 0.0)))) < 1e-10


def test_positivity_check(torus8):
    om = flat_torus_metric(torus8)
    assert is_positive(om) and not is_positive(-om)
    assert not is_positive(om, floor=1.0)
    with pytest.raises(ValueError):
        is_positive(om, floor=-1.0)


def test_pluriclosed_detects_non_closed(torus8):
    x1, _, x3, _ = torus8.mesh()
    bad = SplitForm(ScalarField(torus8, 1 + 0.1 * np.cos(2 * np.pi * x3)), torus8.ones())
    assert pluriclosed_residual(bad) > 0.1
