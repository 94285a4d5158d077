import numpy as np
import pytest

from cclab import systems
from cclab.boman import build_boman_cover, padded, verify_cover
from cclab.grid import GridDomain
from cclab.metric import distance_map

GRU = systems.grushin(2).frame()
EUC = systems.euclidean(2).frame()


@pytest.fixture(scope="module")
def square():
    g = GridDomain.box([-1, -1], [1, 1], 32)
    return g, build_boman_cover(EUC, g, 2.0, g)


def test_single_ball_domain():
    g = GridDomain.box([-1, -1], [1, 1], 32)
    ball = distance_map(EUC, g.snap((0, 0)), g) < 0.6
    cover = build_boman_cover(EUC, ball, 1.0, g)
    assert len(cover.centers) == 1
    assert cover.chains == [[0]] and cover.M >= 1
    assert verify_cover(cover)["pass"]


def test_euclidean_square(square):
    g, cover = square
    ver = verify_cover(cover)
    assert ver["pass"], ver
    assert np.isfinite(cover.M)
    # overlap of the dilated balls is an integer count bounded by M
    assert cover.stats["overlap"] <= cover.M


def test_chains_start_at_central_ball(square):
    _, cover = square
    for k, chain in enumerate(cover.chains):
        assert chain[0] == cover.central and chain[-1] == k
        assert all(cover.parents[b] == a for a, b in zip(chain, chain[1:]))


def test_dilates_stay_inside(square):
    _, cover = square
    outside = ~cover.domain.ravel()
    for k in range(len(cover.centers)):
        assert not np.any(cover.ball_mask(k, cover.tau).ravel() & outside)


def test_grushin_square_cover():
    g = GridDomain.box([-1, -1], [1, 1], 32)
    cover = build_boman_cover(GRU, g, 2.0, g)
    assert verify_cover(cover)["pass"]
    assert cover.stats["covered_fraction"] > 0.6
    d = cover.to_dict()
    assert d["balls"] == len(cover.centers) and len(d["radii"]) == d["balls"]


def test_verify_detects_tampering():
    g = GridDomain.box([-1, -1], [1, 1], 24)
    cover = build_boman_cover(EUC, g, 2.0, g)
    cover.M = 1.0
    assert not verify_cover(cover)["pass"]


def test_rejects_disconnected_domain():
    g = GridDomain.box([-1, -1], [1, 1], 16)
    mask = np.zeros(g.shape, dtype=bool)
    mask[1:5, 1:5] = mask[10:15, 10:15] = True
    with pytest.raises(ValueError, match="disconnected"):
        build_boman_cover(EUC, mask, 2.0, g)


def test_rejects_small_tau():
    g = GridDomain.box([-1, -1], [1, 1], 8)
    with pytest.raises(ValueError):
        build_boman_cover(EUC, g, 0.5, g)


def test_padded_grid_keeps_spacing():
    g = GridDomain.box([-1, -1], [1, 1], 8)
    p = padded(g, 2)
    np.testing.assert_allclose(p.spacing, g.spacing)
    assert p.shape == (12, 12)
