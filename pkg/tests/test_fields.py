from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from cclab import poly as P
from cclab import systems
from cclab.fields import (Frame, PolyVectorField, WeightSpec, all_tuples, bracket,
                          check_homogeneous_type, degree_QI, filtration_dims, generate_frame,
                          lambda_I, lambda_grid, max_nonisotropic_dim, nonisotropic_dim,
                          sobolev_exponent)

# ---------------------------------------------------------------- polynomials


def test_parse_rational_coefficient():
    p = P.parse_polynomial("2*x1^2 - 1/3*x2", 2)
    x1, x2 = P.symbols(2)
    assert p == sp.Poly(2 * x1 ** 2 - sp.Rational(1, 3) * x2, x1, x2, domain="QQ")
    assert p.coeff_monomial(x2) == sp.Rational(1, 3) * -1


@pytest.mark.parametrize("text", ["x1^", "x3", "2**", "x1 +* x2", "", "sin(x1)"])
def test_parse_rejects(text):
    with pytest.raises(P.PolynomialSyntaxError):
        P.parse_polynomial(text, 2)


def test_evaluator_matches_exact():
    p = P.parse_polynomial("x1^3 - 5/7*x1*x2 + 2", 2)
    pts = np.array([[0.5, -1.25], [2.0, 3.0]])
    got = P.PolyEvaluator(p)(pts)
    want = [float(P.eval_exact(p, x)) for x in pts]
    np.testing.assert_allclose(got, want, rtol=1e-14)


# ---------------------------------------------------------------- brackets

coeff = st.fractions(min_value=-3, max_value=3, max_denominator=4)


@st.composite
def poly_fields(draw, n=2, deg=2):
    xs = P.symbols(n)
    monos = [m for m in sp.itermonomials(xs, deg)]
    comps = []
    for _ in range(n):
        cs = draw(st.lists(coeff, min_size=len(monos), max_size=len(monos)))
        expr = sum(sp.Rational(c.numerator, c.denominator) * m for c, m in zip(cs, monos))
        comps.append(sp.Poly(expr, *xs, domain="QQ"))
    return PolyVectorField(comps)


@settings(max_examples=30, deadline=None)
@given(poly_fields(), poly_fields())
def test_bracket_antisymmetric(Y, Z):
    assert bracket(Y, Z) == -bracket(Z, Y)


@settings(max_examples=15, deadline=None)
@given(poly_fields(), poly_fields(), poly_fields())
def test_jacobi(X, Y, Z):
    total = bracket(X, bracket(Y, Z)) + bracket(Y, bracket(Z, X)) + bracket(Z, bracket(X, Y))
    assert total.is_zero()


def test_bracket_dimension_mismatch():
    with pytest.raises(ValueError):
        bracket(PolyVectorField(["1", "0"]), PolyVectorField(["1", "0", "0"]))


# ---------------------------------------------------------------- frames


@pytest.mark.parametrize("r, expected", [
    (1, [(["1", "0"], 1), (["0", "1"], 1)]),
    (2, [(["1", "0"], 1), (["0", "x1"], 1), (["0", "1"], 2)]),
    (3, [(["1", "0"], 1), (["0", "x1^2"], 1), (["0", "2*x1"], 2), (["0", "2"], 3)]),
])
def test_grushin_frame(r, expected):
    fr = systems.grushin(r).frame()
    got = [(PolyVectorField.parse(f).to_strings(), d) for f, d in expected]
    assert [(e.field.to_strings(), e.degree) for e in fr.entries] == got


def test_heisenberg_frame():
    fr = systems.heisenberg().frame()
    assert fr.q == 3
    assert list(fr.degrees) == [1, 1, 2]
    assert fr.fields[2] == PolyVectorField(["0", "0", "1"])
    assert fr.invariant_axes() == (2,)


def test_frame_prunes_sign_duplicates():
    fr = systems.heisenberg().frame()
    # [X2, X1] = -[X1, X2] is dropped, not listed twice
    assert (1, 0) in fr.pruned


def test_frame_rejects_bad_input():
    with pytest.raises(ValueError):
        generate_frame([], 2)
    with pytest.raises(ValueError):
        generate_frame([PolyVectorField(["1", "0"])], 0)


# ---------------------------------------------------------------- lambda, degrees, Q(x)


def test_grushin_lambda():
    fr = systems.grushin(2).frame()
    assert lambda_I(fr, (1, 2), (0.75, 3.0)) == 0.75
    assert lambda_I(fr, (1, 3), (0.75, 3.0)) == 1.0
    assert lambda_I(fr, (2, 3), (0.75, 3.0)) == 0.0
    assert degree_QI(fr, (1, 2)) == 2
    assert degree_QI(fr, (1, 3)) == 3


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_lambda_alternating(a, b, c):
    fr = systems.heisenberg().frame()
    x = (a, b, c)
    assert lambda_I(fr, (1, 2, 3), x) == -lambda_I(fr, (2, 1, 3), x)
    assert lambda_I(fr, (1, 1, 3), x) == 0.0


def test_lambda_grid_matches_exact():
    fr = systems.grushin(3).frame()
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    for I in all_tuples(fr):
        want = [lambda_I(fr, I, x) for x in pts]
        np.testing.assert_allclose(lambda_grid(fr, I, pts), want, atol=1e-12)


def test_tuple_validation():
    fr = systems.grushin(2).frame()
    with pytest.raises(ValueError):
        lambda_I(fr, (1,), (0, 0))
    with pytest.raises(IndexError):
        lambda_I(fr, (1, 4), (0, 0))


@pytest.mark.parametrize("x, dims, Q", [((0.0, 0.3), [1, 1], 3), ((0.5, 0.3), [2, 0], 2)])
def test_grushin_filtration(x, dims, Q):
    fr = systems.grushin(2).frame()
    assert filtration_dims(fr, x) == dims
    assert nonisotropic_dim(fr, x) == Q


def test_max_dimension_over_samples():
    fr = systems.grushin(2).frame()
    assert max_nonisotropic_dim(fr, [[0.4, 0.0], [0.8, 1.0]]) == 2
    assert max_nonisotropic_dim(fr, [[0.4, 0.0], [0.0, 1.0]]) == 3
    assert nonisotropic_dim(systems.heisenberg().frame(), (1, 2, 3)) == 4


@pytest.mark.parametrize("system", [systems.grushin(2), systems.grushin(3), systems.heisenberg(),
                                    systems.euclidean(3)])
def test_homogeneous_type(system):
    fr = system.frame()
    pts = np.random.default_rng(1).uniform(-1, 1, (16, fr.N))
    rep = check_homogeneous_type(fr, pts)
    assert rep.passed
    assert rep.max_residual < 1e-10


def test_homogeneous_type_detects_missing_direction():
    # a single field in the plane never spans
    fr = Frame.from_fields([PolyVectorField(["1", "0"])], [1])
    rep = check_homogeneous_type(fr, [[0.1, 0.2]])
    assert not rep.rank_ok


# ---------------------------------------------------------------- weights


def test_weight_and_exponent():
    fr = systems.grushin(2).frame()
    w = WeightSpec(fr, (1, 2), 1)
    assert w.exponent == 1.0
    assert w.p_star == 2.0
    np.testing.assert_allclose(w(np.array([[-0.5, 1.0], [0.25, 0.0]])), [0.5, 0.25])
    with pytest.raises(ValueError, match="p must be < Q_I"):
        WeightSpec(fr, (1, 2), 3)


@pytest.mark.parametrize("p, Q, ps", [(1, 2, 2), (1, 3, 1.5), (2, 3, 6), (1, 4, Fraction(4, 3))])
def test_sobolev_exponent(p, Q, ps):
    assert sobolev_exponent(p, Q) == pytest.approx(float(ps))
