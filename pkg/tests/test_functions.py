import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cclab import systems
from cclab.fields import PolyVectorField
from cclab.functions import (ComplexFunction, Dilation, SampledFunction, TestFunction, bump_family,
                             dilate, dilation_stable, field_derivatives, scaled)
from cclab.grid import GridDomain

GRU = systems.grushin(2)
D_GRU = Dilation((1, 2))


def test_bump_values_and_support():
    f = TestFunction.bump([0, 0], [0.5, 0.25])
    assert f(np.array([0.0, 0.0])) == 1.0
    assert f(np.array([0.5, 0.0])) == 0.0
    assert f(np.array([0.0, 0.3])) == 0.0
    lo, hi = f.support_box()
    np.testing.assert_allclose(lo, [-0.5, -0.25])
    np.testing.assert_allclose(hi, [0.5, 0.25])


def test_polynomial_has_no_support():
    f = TestFunction.polynomial("x1*x2", 2)
    assert not f.compact
    with pytest.raises(ValueError):
        f.support_box()


def test_symbolic_derivative_grushin():
    g = GridDomain.box([-1, -1], [1, 1], 8)
    X1, X2 = GRU.generators
    f = TestFunction.polynomial("x2", 2)
    np.testing.assert_allclose(f.derivative(X2, g.centers), g.centers[..., 0])
    np.testing.assert_allclose(f.derivative(X1, g.centers), 0.0)


def test_symbolic_matches_finite_differences_second_order():
    f = TestFunction.bump([0.1, -0.05], [0.6, 0.7], "1 + x1*x2")
    gens = systems.euclidean(2).generators
    errs = []
    for n in (32, 64, 128):
        g = GridDomain.box([-1, -1], [1, 1], n)
        sym = field_derivatives(gens, f, g, "symbolic")
        fd = field_derivatives(gens, SampledFunction(g, f.sample(g)), g, "fd")
        errs.append(np.max(np.abs(sym - fd)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7), (errs, rates)


def test_complex_derivatives_split():
    g = GridDomain.box([-1, -1], [1, 1], 8)
    re = TestFunction.bump([0, 0], 0.8, "x1")
    im = TestFunction.bump([0, 0], 0.8, "x2")
    d = field_derivatives(GRU.generators, ComplexFunction(re, im), g)
    np.testing.assert_allclose(d.real, field_derivatives(GRU.generators, re, g))
    np.testing.assert_allclose(d.imag, field_derivatives(GRU.generators, im, g))


def test_unknown_mode():
    g = GridDomain.box([-1, -1], [1, 1], 4)
    with pytest.raises(ValueError):
        field_derivatives(GRU.generators, TestFunction.polynomial("x1", 2), g, "spectral")


# ---------------------------------------------------------------- dilations


def test_dilation_degrees():
    assert D_GRU.Q == 3
    D_GRU.validate(GRU.generators)
    Dilation((1, 1, 2)).validate(systems.heisenberg().generators)
    with pytest.raises(ValueError):
        Dilation((1, 1)).validate(GRU.generators)
    assert Dilation((1, 1)).homogeneous_degree(PolyVectorField(["x1", "0"])) == 0


def test_dilate_identity():
    f = TestFunction.bump([0, 0], [0.5, 0.5], "x1^2")
    assert dilate(f, D_GRU, 1.0) is f


def test_dilate_support_box():
    f = TestFunction.bump([0, 0], [0.4, 0.6])
    lo, hi = dilate(f, D_GRU, 0.5).support_box()
    np.testing.assert_allclose(hi, [0.2, 0.15])
    np.testing.assert_allclose(lo, [-0.2, -0.15])


def test_dilate_rejects_unstable_domain():
    f = TestFunction.bump([0.5, 0.5], [0.2, 0.2])
    with pytest.raises(ValueError):
        dilate(f, D_GRU, 0.5, GridDomain.box([0.2, 0.2], [1, 1], 8))
    assert dilation_stable([-1, 0], [1, 1]) and not dilation_stable([0.1, -1], [1, 1])
    with pytest.raises(ValueError):
        dilate(f, D_GRU, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([0.25, 0.5, 0.75, 1.0]), st.sampled_from([0.125, 0.5, 0.8]),
       st.tuples(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05)))
def test_dilate_composes(d1, d2, x):
    f = TestFunction.bump([0.1, -0.1], [0.5, 0.4], "1 + x1 - 2*x2")
    a = dilate(dilate(f, D_GRU, d1), D_GRU, d2)
    b = dilate(f, D_GRU, d1 * d2)
    assert a(np.array(x)) == pytest.approx(b(np.array(x)), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("q", [1.0, 2.0])
def test_dilated_integral_scales_with_Q(q):
    f = TestFunction.bump([0, 0], [0.8, 0.8], "1 + x1")
    delta = 0.5

    def integral(h):
        lo, hi = h.support_box()
        g = GridDomain.box(lo, hi, 200)
        return np.sum(np.abs(h.sample(g)) ** q) * g.cell_volume

    assert integral(dilate(f, D_GRU, delta)) == pytest.approx(delta ** 3 * integral(f), rel=1e-6)


# ---------------------------------------------------------------- families


def test_bump_family_reproducible_and_inside():
    dom = GridDomain.box([-1, -1], [1, 1], 8)
    a, b = bump_family(dom, 5, seed=3), bump_family(dom, 5, seed=3)
    assert [f.center for f in a] == [f.center for f in b]
    assert all(f.support_inside(dom) for f in a)


def test_scaled():
    f = TestFunction.bump([0, 0], 0.5, "x1")
    x = np.array([0.1, 0.2])
    assert scaled(f, 2.5)(x) == pytest.approx(2.5 * f(x))
