import math

import numpy as np
import pytest

from cclab import systems
from cclab.grid import GridDomain
from cclab.metric import (DistanceMaps, ReachabilityParams, V_of, adapted_grid, ball_volume,
                          cc_distance, distance_map, nsw_ratio_check, predicted_volume,
                          reach_bound, reachable_set)

EUC = systems.euclidean(2).frame()
GRU = systems.grushin(2).frame()
SQUARE = GridDomain.box([-1, -1], [1, 1], 64)


def test_grid_basics():
    g = GridDomain.box([0, 0], [1, 2], (4, 8))
    assert g.cell_volume == pytest.approx(1 / 16)
    assert g.flat_index(g.center_of((3, 5))) == 3 * 8 + 5
    assert GridDomain.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        GridDomain.box([0, 0], [0, 1], 4)


@pytest.mark.parametrize("x, y", [((0, 0), (0.5, 0.25)), ((-0.7, 0.3), (0.2, -0.6)),
                                  ((0.1, 0.1), (0.1, 0.9))])
def test_euclidean_distance_is_sup_norm(x, y):
    x, y = SQUARE.snap(x), SQUARE.snap(y)
    assert cc_distance(EUC, x, y, SQUARE) == pytest.approx(np.max(np.abs(x - y)), rel=0.02)


def test_distance_zero_and_symmetry():
    x, y = SQUARE.snap((0.3, -0.2)), SQUARE.snap((-0.4, 0.5))
    assert cc_distance(GRU, x, x, SQUARE) == 0.0
    assert cc_distance(GRU, x, y, SQUARE) == pytest.approx(cc_distance(GRU, y, x, SQUARE), rel=0.02)


@pytest.mark.parametrize("delta", [2 ** -4, 2 ** -3, 2 ** -2])
def test_euclidean_ball_volume(delta):
    assert ball_volume(EUC, (0, 0), delta, SQUARE) == pytest.approx((2 * delta) ** 2, rel=0.1)


def test_ball_volume_monotone():
    vols = [ball_volume(GRU, (0.25, 0), d, SQUARE) for d in (0.05, 0.1, 0.2, 0.4)]
    assert all(a < b for a, b in zip(vols, vols[1:]))


def test_reachable_set_contains_source():
    mask = reachable_set(GRU, (0, 0), 0.1, SQUARE)
    assert mask.shape == SQUARE.shape and mask[SQUARE.index_of((0, 0))]


def test_distance_maps_agree_with_bisection():
    x = SQUARE.snap((0.25, 0.0))
    rho = distance_map(GRU, x, SQUARE)
    for y in [(0.5, 0.5), (-0.3, -0.2), (0.9, 0.0)]:
        y = SQUARE.snap(y)
        assert rho[SQUARE.index_of(y)] == pytest.approx(cc_distance(GRU, x, y, SQUARE), rel=0.05)


def test_distance_maps_volume_matches_ball_volume():
    x = SQUARE.snap((0.0, 0.0))
    dm = DistanceMaps(GRU, SQUARE, [SQUARE.flat_index(x)])
    for d in (0.1, 0.3):
        assert dm.volume(0, np.array([d]))[0] == pytest.approx(ball_volume(GRU, x, d, SQUARE), rel=0.1)


def test_V_of_diagonal_is_cell():
    x = SQUARE.snap((0.1, 0.1))
    assert V_of(GRU, x, x, SQUARE) == SQUARE.cell_volume


@pytest.mark.parametrize("system, slope", [(systems.euclidean(2), 2), (systems.grushin(2), 3)])
def test_volume_slope_at_origin(system, slope):
    fr = system.frame()
    ds = [2 ** -k for k in range(6, 1, -1)]
    vols = [ball_volume(fr, (0, 0), d, adapted_grid(fr, (0, 0), d, 65)) for d in ds]
    assert np.polyfit(np.log(ds), np.log(vols), 1)[0] == pytest.approx(slope, abs=0.15)


def test_reach_bound_grushin():
    w = reach_bound(GRU, (0, 0), 0.5)
    # |x1| <= delta, |x2| <= delta^2 + delta * delta  at the origin
    assert w[0] == pytest.approx(0.5)
    assert w[1] == pytest.approx(0.5 ** 2 + 0.5 * 0.5, rel=1e-6)


def test_predicted_volume():
    assert predicted_volume(GRU, (0, 0), 0.5) == pytest.approx(0.5 ** 3)
    assert predicted_volume(GRU, (0.5, 0), 0.1) == pytest.approx(max(0.5 * 0.01, 0.001))
    assert predicted_volume(EUC, (0.3, 0.3), 0.25) == pytest.approx(0.0625)


def test_nsw_euclidean_constant_ratio():
    rep = nsw_ratio_check(EUC, [(0, 0), (0.3, -0.2)], [0.0625, 0.125, 0.25], SQUARE)
    assert rep["pass"] and rep["spread"] <= 1.5


def test_nsw_grushin_bounded():
    rep = nsw_ratio_check(GRU, [(0, 0), (0.5, 0)], [2 ** -4, 2 ** -2])
    assert math.isfinite(rep["spread"]) and rep["spread"] <= 10


def test_params_validation():
    with pytest.raises(ValueError):
        ReachabilityParams(stencil=0)
    with pytest.raises(ValueError):
        ReachabilityParams(tol=0)
