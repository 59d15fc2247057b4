from __future__ import annotations

import numpy as np
import pytest

from bihermitian.backends import flat_torus_metric
from bihermitian.cohomology import (cone_coordinates, conformal_family, decompose,
                                    realize_proportional)
from bihermitian.errors import (DegenerateBasisError, IncompatibleDataError,
                                PluriclosedError)
from bihermitian.forms import SplitForm, box, bracket, is_positive
from bihermitian.grid import NEUMANN, ScalarField, integrate, random_smooth_field


@pytest.fixture(scope="module")
def basis(torus8):
    base = flat_torus_metric(torus8) * np.exp(random_smooth_field(torus8, 5, 0.3))
    return conformal_family(base, 0.0), conformal_family(base, 1.0)


def _osc(a):
    return float(np.max(a) - np.min(a))


def test_realize_multiple(basis):
    A, _ = basis
    real = realize_proportional(A * 3.0, A)
    assert real.c == pytest.approx(3.0, abs=1e-12)
    assert _osc(real.u.values) < 1e-12


def test_realize_box_perturbation(basis, torus8):
    A, _ = basis
    v = random_smooth_field(torus8, 8, 0.1)
    real = realize_proportional(A + box(v, NEUMANN), A)
    assert real.c == pytest.approx(1.0, abs=1e-12)
    assert _osc(real.u.values + v.values) < 1e-10
    assert real.residual < 1e-10 and real.ratio_gap < 1e-10


def test_realize_rejects_nonzero_bracket(basis):
    A, B = basis
    # scale B so that {B', A} = 1
    B1 = B * (1.0 / float(bracket(B, A)))
    with pytest.raises(IncompatibleDataError, match="bracket"):
        realize_proportional(B1, A)


def test_zero_class_probe(basis, torus8):
    A, _ = basis
    zero = SplitForm(torus8.zeros(), torus8.zeros())
    real = realize_proportional(zero, A)
    assert abs(real.c) < 1e-14
    assert not is_positive(real.omega_u)


def test_decompose_basis_element(basis):
    A, B = basis
    dec = decompose(A, A, B)
    assert dec.rA == pytest.approx(1.0, abs=1e-12)
    assert dec.rB == pytest.approx(0.0, abs=1e-12)
    assert _osc(dec.u.values) < 1e-10


@pytest.mark.parametrize("swap", [False, True])
def test_decompose_construction(basis, torus8, swap):
    A, B = basis
    if swap:
        A, B = B, A
    v = random_smooth_field(torus8, 21, 0.1)
    omega = A * 2.0 + B * 3.0 + box(v, NEUMANN)
    dec = decompose(omega, A, B)
    assert dec.rA == pytest.approx(2.0, abs=1e-10)
    assert dec.rB == pytest.approx(3.0, abs=1e-10)
    # omega - 2A - 3B = box(u) pins u = v + const
    assert _osc(dec.u.values - v.values) < 1e-10
    assert dec.residual < 1e-10
    assert dec.bracket_coords == pytest.approx((2.0, 3.0), abs=1e-10)


def test_decompose_negative_coordinates(basis, torus8):
    A, B = basis
    omega = A * -1.5 + B * 0.25 + box(random_smooth_field(torus8, 3, 0.1), NEUMANN)
    dec = decompose(omega, A, B)
    assert (dec.rA, dec.rB) == pytest.approx((-1.5, 0.25), abs=1e-10)


def test_decompose_degenerate(basis):
    A, _ = basis
    with pytest.raises(DegenerateBasisError):
        decompose(A, A, A)


def test_decompose_requires_pluriclosed(basis, torus8):
    A, B = basis
    x3 = torus8.mesh()[2]
    bad = SplitForm(ScalarField(torus8, 1 + 0.2 * np.cos(2 * np.pi * x3)), torus8.ones())
    with pytest.raises(PluriclosedError):
        decompose(bad, A, B)


@pytest.mark.parametrize("i", range(20))
def test_round_trip_random(basis, torus8, i):
    A, B = basis
    rng = np.random.default_rng(i)
    rA, rB = rng.uniform(-4, 4, size=2)
    omega = A * rA + B * rB + box(random_smooth_field(torus8, 200 + i, 0.1), NEUMANN)
    dec = decompose(omega, A, B)
    assert abs(dec.rA - rA) < 1e-8 and abs(dec.rB - rB) < 1e-8


def test_conformal_family_unit_volume(basis, torus8):
    A, _ = basis
    assert integrate(2 * A.plus.values * A.minus.values, torus8) == pytest.approx(1.0)


def test_conformal_family_flat_closed_form(torus8):
    om = conformal_family(flat_torus_metric(torus8), 1.0)
    f = -0.5 * np.log(8.0)
    assert np.max(np.abs(om.plus.values - np.exp(f + 1.0))) < 1e-12
    assert np.max(np.abs(om.minus.values - np.exp(f - 1.0))) < 1e-12


def test_conformal_family_bracket_positive(basis, torus8):
    base = flat_torus_metric(torus8) * np.exp(random_smooth_field(torus8, 5, 0.3))
    w1, wh = conformal_family(base, 1.0), conformal_family(base, 0.5)
    assert float(bracket(w1, wh)) > 0


def test_cone_coordinates(basis, torus8):
    A, B = basis
    assert cone_coordinates(A, A, B)[:2] == pytest.approx((1.0, 0.0), abs=1e-12)
    neg = cone_coordinates(-A, A, B)
    assert neg.p == pytest.approx(-1.0) and not neg.in_cone
    omega = A * 2.0 + B * 5.0 + box(random_smooth_field(torus8, 9, 0.1), NEUMANN)
    cc = cone_coordinates(omega, A, B)
    assert (cc.p, cc.q) == pytest.approx((2.0, 5.0), abs=1e-10) and cc.in_cone
    with pytest.raises(DegenerateBasisError):
        cone_coordinates(omega, A, A)
