import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cclab import systems
from cclab.functions import cell_indicators, dyadic_boxes, indicator_sweep
from cclab.grid import GridDomain
from cclab.potential import (MeasureOnGrid, ScalarField, apply_T, delta_alpha_check,
                             kernel_K, kernel_operator, kernel_pointwise_check, lp_norm,
                             mpe_check, weak_quasinorm, wpe_check)

GRU = systems.grushin(2).frame()
EUC = systems.euclidean(2).frame()
G16 = GridDomain.box([-1, -1], [1, 1], 16)
G32 = GridDomain.box([-1, -1], [1, 1], 32)


def test_lp_norm_of_constant():
    m = MeasureOnGrid.lebesgue(G16)
    assert lp_norm(np.full(G16.shape, 3.0), 2, m) == pytest.approx(3.0 * 2.0)
    assert lp_norm(np.zeros(G16.shape), 1, m) == 0.0


def test_weak_quasinorm_two_level():
    # |g| = 2 on half the square, 1 on the rest; measure 2 each
    g = np.where(G16.centers[..., 0] < 0, 2.0, 1.0)
    m = MeasureOnGrid.lebesgue(G16)
    want = max(2.0 * 2.0 ** (1 / 1.5), 1.0 * 4.0 ** (1 / 1.5))
    assert weak_quasinorm(g, 1.5, m) == pytest.approx(want)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (16, 16), elements=st.floats(-5, 5)), st.floats(0.5, 4.0))
def test_chebyshev(g, r):
    m = MeasureOnGrid.lebesgue(G16)
    strong = float(np.sum(np.abs(g) ** r * m.cell_mass) ** (1 / r))
    assert weak_quasinorm(g, r, m) <= strong * (1 + 1e-12) + 1e-300


def test_measure_rejects_negative():
    with pytest.raises(ValueError):
        MeasureOnGrid(G16, -np.ones(G16.shape))
    with pytest.raises(ValueError):
        ScalarField(G16, np.full(G16.shape, np.nan))


def test_mu_measure_grushin():
    mu = MeasureOnGrid.mu(GRU, (1, 2), G16)
    np.testing.assert_allclose(mu.density, np.abs(G16.centers[..., 0]))


# ---------------------------------------------------------------- kernel operator


def test_kernel_diagonal_flag():
    K, diag = kernel_K(GRU, (0.1, 0.1), (0.1, 0.1), G32)
    assert diag and math.isfinite(K)
    K2, diag2 = kernel_K(GRU, (0.1, 0.1), (0.5, -0.3), G32)
    assert not diag2 and K2 > 0


def test_kernel_symmetric_euclid():
    op = kernel_operator(EUC, G32)
    i, j = G32.flat_index((0.2, 0.1)), G32.flat_index((-0.5, 0.6))
    assert op.kernel(i, j) == pytest.approx(op.kernel(j, i), rel=0.05)


def test_apply_matches_dense_sum():
    op = kernel_operator(GRU, G16)
    rng = np.random.default_rng(2)
    f = rng.standard_normal(G16.shape)
    dense = np.array([[op.kernel(i, j) for j in range(G16.size)] for i in range(G16.size)])
    want = (dense @ f.ravel() * G16.cell_volume).reshape(G16.shape)
    np.testing.assert_allclose(op.apply(f), want, rtol=1e-10, atol=1e-12)


def test_symmetry_reduction_matches_bounded_grid_locally():
    # far from the box edges the extended grid sees the same short paths
    a = kernel_operator(GRU, G32, use_symmetry=True)
    b = kernel_operator(GRU, G32, use_symmetry=False)
    i = G32.flat_index((0.03, 0.03))
    ra, rb = a.distance_rows([i])[0], b.distance_rows([i])[0]
    near = ra < 0.3
    assert near.sum() > 20
    np.testing.assert_allclose(ra[near], rb[near], rtol=1e-9)


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, (16, 16), elements=st.floats(0, 1)),
       arrays(np.float64, (16, 16), elements=st.floats(0, 1)), st.floats(-3, 3))
def test_apply_linear_and_positive(f, g, c):
    Tf, Tg = apply_T(GRU, f, G16), apply_T(GRU, g, G16)
    np.testing.assert_allclose(apply_T(GRU, f + c * g, G16), Tf + c * Tg, rtol=1e-9, atol=1e-9)
    assert np.all(Tf >= 0)


def test_apply_batches():
    F = np.random.default_rng(4).random((3, 16, 16))
    op = kernel_operator(GRU, G16)
    np.testing.assert_allclose(op.apply(F)[1], op.apply(F[1]))


# ---------------------------------------------------------------- checks


def sweep(grid):
    return indicator_sweep(grid, dyadic_boxes([0, 0], [0.5, 0.25], [[-0.5, -0.5], [0, 0]]))


def test_wpe_rejects_large_p():
    with pytest.raises(ValueError, match="p must be < Q_I"):
        wpe_check(GRU, (1, 2), 2.0, sweep(G16), G16)


def test_wpe_weak_and_strong():
    weak = wpe_check(GRU, (1, 2), 1.0, sweep(G32), G32, bound=100)
    strong = wpe_check(GRU, (1, 3), 2.0, sweep(G32), G32, bound=100)
    assert weak["weak"] and weak["target_exponent"] == 2.0 and weak["pass"]
    assert not strong["weak"] and strong["target_exponent"] == pytest.approx(6.0)
    assert 0 < strong["max_ratio"] < math.inf


def test_wpe_zero_function_ignored():
    rep = wpe_check(GRU, (1, 2), 1.0, [np.zeros(G16.shape)], G16)
    assert rep["records"][0]["ignored"] and rep["max_ratio"] == 0.0


def test_mpe_weight_tames_kernel_near_axis():
    rep = mpe_check(GRU, (1, 2), sweep(G32), G32)
    assert rep["r"] == 2.0
    assert rep["lebesgue_exceeds"]


def test_kernel_pointwise_skips_diagonal():
    rep = kernel_pointwise_check(GRU, (1, 2), [((0.1, 0.1), (0.1, 0.1)), ((0.1, 0.1), (0.6, 0.2))], G32)
    assert rep["skipped"] == 1 and len(rep["records"]) == 1


def test_kernel_pointwise_euclid_constant():
    # rho/V = 1/(4 rho) and V^{1/2-1} = 1/(2 rho): ratio 1/2 up to the lattice metric error
    pairs = [((0, 0), (0.5, 0.25)), ((-0.5, 0.5), (0.5, -0.25)), ((0.2, 0.2), (0.3, -0.6))]
    rep = kernel_pointwise_check(EUC, (1, 2), pairs, G32)
    for r in rep["records"]:
        assert r["ratio"] == pytest.approx(0.5, rel=0.15)


def test_unit_mass_cells():
    fs = cell_indicators(G16, [(0.1, 0.1)])
    assert np.sum(fs[0]) * G16.cell_volume == pytest.approx(1.0)


def test_delta_alpha_relation():
    g = GridDomain.box([-1, -1], [1, 1], 48)
    op = kernel_operator(EUC, g)
    lv = op.rows([g.flat_index((0, 0))])[0]
    lv = lv[np.isfinite(lv) & (lv > 0)]
    rep = delta_alpha_check(EUC, (0, 0), np.quantile(lv, [0.6, 0.8]).tolist(), g)
    assert rep["pass"], rep
