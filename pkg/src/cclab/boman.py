"""Discrete Whitney-type covers by metric balls with chains to a central ball."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .fields import Frame
from .grid import GridDomain
from .metric import ReachabilityParams
from .potential import KernelOperator, kernel_operator

SLACK = 1e-9   # strict containment margin when M is chosen from measured ratios


@dataclass
class BomanCover:
    """Balls ``B(c, r) = {y : rho(c, y) < r}`` on ``grid`` covering the ``domain`` mask.

    ``chains[k]`` lists ball indices from the central ball to ball ``k``;
    ``links[k]`` is the ball ``(center, radius)`` inside ``B_k`` and its
    parent that the chain condition asks for.
    """

    grid: GridDomain
    domain: np.ndarray            # boolean, grid shape
    covered: np.ndarray           # union of the balls, inside ``domain``
    centers: np.ndarray           # flat cell indices
    radii: np.ndarray
    tau: float
    M: float
    central: int
    parents: list[int]
    chains: list[list[int]]
    links: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    _op: KernelOperator | None = field(default=None, repr=False)

    def row(self, k: int) -> np.ndarray:
        return self._op.distance_rows([self.centers[k]])[0]

    def ball_mask(self, k: int, scale: float = 1.0) -> np.ndarray:
        return self.row(k) < scale * self.radii[k]

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "balls": len(self.centers), "tau": self.tau,
                "M": self.M, "central": self.central,
                "centers": [self.grid.center_of(np.unravel_index(c, self.grid.shape)).tolist()
                            for c in self.centers],
                "radii": self.radii.tolist(),
                "chain_lengths": [len(c) for c in self.chains], **self.stats}


def padded(grid: GridDomain, pad: int) -> GridDomain:
    h = grid.spacing
    return GridDomain(tuple(np.array(grid.lower) - pad * h), tuple(np.array(grid.upper) + pad * h),
                      tuple(s + 2 * pad for s in grid.shape))


def box_mask(grid: GridDomain, lower, upper) -> np.ndarray:
    pts = grid.centers
    return np.all((pts >= np.asarray(lower)) & (pts <= np.asarray(upper)), axis=-1)


def _distance_to_complement(op: KernelOperator, domain: np.ndarray, chunk: int = 256):
    """Distance from each domain cell to the complement, and to its farthest face neighbour."""
    shape = domain.shape
    flat = domain.ravel()
    d = np.zeros(flat.size)
    near = np.zeros(flat.size)
    idx = np.flatnonzero(flat)
    outside = ~flat
    multi = np.array(np.unravel_index(idx, shape)).T
    nbrs = []
    for ax in range(len(shape)):
        for step in (-1, 1):
            m = multi.copy()
            m[:, ax] = np.clip(m[:, ax] + step, 0, shape[ax] - 1)
            nbrs.append(np.ravel_multi_index(m.T, shape))
    nbrs = np.stack(nbrs, axis=1)
    for s in range(0, len(idx), chunk):
        rows = op.distance_rows(idx[s:s + chunk])
        d[idx[s:s + chunk]] = rows[:, outside].min(axis=1)
        near[idx[s:s + chunk]] = np.take_along_axis(rows, nbrs[s:s + chunk], axis=1).max(axis=1)
    return d, near


def build_boman_cover(frame: Frame, domain, tau: float, grid: GridDomain,
                      params: ReachabilityParams = ReachabilityParams(),
                      shrink: float = 1.0, core_factor: float = 1.5) -> BomanCover:
    """Greedy cover of ``domain`` (a box ``GridDomain`` on ``grid``, or a boolean mask).

    Cells are visited in decreasing distance ``d`` to the complement; each
    uncovered cell becomes the centre of a ball of radius ``d/(tau*shrink)``,
    so every dilate ``tau B`` stays inside the domain.  Near the boundary such
    balls shrink below the cell size and become single cells that cannot
    overlap anything, so only the resolved core is covered: cells whose
    radius exceeds ``core_factor`` times the distance to each face neighbour.
    Such a ball contains the neighbours of its centre, so a new ball next to
    the covered cluster always meets it.  The covered set tends to the domain under refinement and
    is reported as ``covered_fraction``.  The computational
    grid is padded by the stencil radius so the complement is represented.
    Chains follow a breadth-first tree of the ball-intersection graph rooted
    at the largest ball, each ball hanging off its largest neighbour one level
    closer to the root.  ``M`` is the least value meeting every invariant.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    pad = params.stencil
    G = padded(grid, pad)
    if isinstance(domain, GridDomain):
        mask = box_mask(G, domain.lower, domain.upper)
    else:
        mask = np.zeros(G.shape, dtype=bool)
        inner = tuple(slice(pad, pad + s) for s in grid.shape)
        mask[inner] = np.asarray(domain, dtype=bool).reshape(grid.shape)
    if not mask.any():
        raise ValueError("empty domain")
    _, ncomp = ndimage.label(mask)
    if ncomp != 1:
        raise ValueError(f"domain is disconnected ({ncomp} components)")

    op = kernel_operator(frame, G, params)
    d, near = _distance_to_complement(op, mask)
    flat = mask.ravel()
    core = flat & (d / (tau * shrink) > core_factor * near)
    if not core.any():
        raise ValueError("domain too small for the grid: no cell admits a multi-cell ball")
    order = [c for c in np.lexsort((np.arange(flat.size), -d)) if core[c]]
    covered = np.zeros(flat.size, dtype=bool)
    centers, radii, masks = [], [], []
    # passes in decreasing d; a ball joins only if it meets the balls so far,
    # so the cover grows as one connected cluster
    while True:
        progress = False
        for c in order:
            if covered[c]:
                continue
            r = d[c] / (tau * shrink)
            ball = op.distance_rows([c])[0] < r
            if centers and not np.any(ball & covered):
                continue
            centers.append(int(c))
            radii.append(float(r))
            masks.append(ball)
            covered |= ball
            progress = True
        order = [c for c in order if not covered[c]]
        if not order:
            break
        if not progress:
            raise ValueError("core cells cannot be reached by overlapping balls")
    centers = np.array(centers)
    radii = np.array(radii)
    masks = np.array(masks)
    n = len(centers)

    inter = (masks.astype(np.int32) @ masks.T.astype(np.int32)) > 0
    central = int(np.lexsort((np.arange(n), -radii))[0])
    depth = np.full(n, -1)
    depth[central] = 0
    parents = [-1] * n
    queue = deque([central])
    while queue:
        k = queue.popleft()
        for j in np.flatnonzero(inter[k]):
            if depth[j] < 0:
                depth[j] = depth[k] + 1
                queue.append(j)
    if np.any(depth < 0):
        raise ValueError("ball intersection graph is disconnected")
    for k in range(n):
        if k == central:
            continue
        cand = [j for j in np.flatnonzero(inter[k]) if depth[j] == depth[k] - 1]
        parents[k] = max(cand, key=lambda j: (radii[j], -j))
    chains = []
    for k in range(n):
        path = [k]
        while parents[path[-1]] >= 0:
            path.append(parents[path[-1]])
        chains.append(path[::-1])

    # overlap of the tau-dilates
    counts = np.zeros(flat.size, dtype=np.int64)
    rows = {}
    for k in range(n):
        rows[k] = op.distance_rows([centers[k]])[0]
        counts += rows[k] < tau * radii[k]
    overlap = int(counts.max())
    outside_hits = int(counts[~flat].max(initial=0))

    # containment of each ball in M times every ball of its chain
    below = [[] for _ in range(n)]
    for k in range(n):
        for j in chains[k]:
            below[j].append(k)
    m_contain = 1.0
    for j in range(n):
        union = masks[below[j]].any(axis=0)
        m_contain = max(m_contain, float(rows[j][union].max()) / radii[j])

    # a ball inside each consecutive intersection whose dilate holds both balls
    links, m_link = {}, 1.0
    for k in range(n):
        j = parents[k]
        if j < 0:
            continue
        both = masks[k] & masks[j]
        cells = np.flatnonzero(both)
        score = np.minimum(radii[k] - rows[k][cells], radii[j] - rows[j][cells])
        best = None
        for z in cells[np.argsort(-score, kind="stable")[:3]]:
            rz = op.distance_rows([z])[0]
            s = float(rz[~both].min())
            need = float(rz[masks[k] | masks[j]].max()) / s
            if best is None or need < best[2]:
                best = (int(z), s, need)
        links[k] = {"center": best[0], "radius": best[1], "M": best[2]}
        m_link = max(m_link, best[2])

    M = max(float(overlap), m_contain * (1 + SLACK), m_link * (1 + SLACK), 1.0)
    union = masks.any(axis=0)
    stats = {"covered_fraction": float(union.sum() / flat.sum()), "overlap": overlap, "outside_hits": outside_hits, "m_contain": m_contain,
             "m_link": m_link, "max_chain": max(len(c) for c in chains)}
    return BomanCover(G, mask, union.reshape(G.shape), centers, radii, float(tau), M, central,
                      parents, chains, links, stats, op)


def verify_cover(cover: BomanCover) -> dict:
    """Recheck the cover invariants from the distance rows with the reported ``M``."""
    n = len(cover.centers)
    flat = cover.domain.ravel()
    masks = np.array([cover.ball_mask(k) for k in range(n)])
    counts = sum((cover.ball_mask(k, cover.tau)).astype(np.int64) for k in range(n))
    covers = bool(np.array_equal(masks.any(axis=0), cover.covered.ravel())
                  and not np.any(cover.covered.ravel() & ~flat))
    overlap_ok = bool(np.all(counts[flat] <= cover.M) and np.all(counts[~flat] == 0))
    contain_ok = True
    for k in range(n):
        for j in cover.chains[k]:
            if np.any(masks[k] & ~cover.ball_mask(j, cover.M)):
                contain_ok = False
    link_ok = True
    for k, ln in cover.links.items():
        j = cover.parents[k]
        rz = cover._op.distance_rows([ln["center"]])[0]
        R = rz < ln["radius"]
        if np.any(R & ~(masks[k] & masks[j])) or np.any((masks[k] | masks[j]) & ~(rz < cover.M * ln["radius"])):
            link_ok = False
    chains_ok = all(c[0] == cover.central and c[-1] == k for k, c in enumerate(cover.chains))
    ok = covers and overlap_ok and contain_ok and link_ok and chains_ok
    return {"covers": covers, "overlap": overlap_ok, "containment": contain_ok,
            "links": link_ok, "chains": chains_ok, "pass": ok}
