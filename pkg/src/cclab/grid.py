"""Uniform cell grids on axis-aligned boxes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridDomain:
    """Box ``[lower, upper]`` split into ``shape`` uniform cells per axis.

    Cells are addressed by integer multi-indices; samples live at cell centres.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        sh = tuple(int(v) for v in self.shape)
        if not (len(lo) == len(hi) == len(sh)) or not lo:
            raise ValueError("lower, upper and shape must have the same positive length")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("upper must exceed lower componentwise")
        if any(s < 2 for s in sh):
            raise ValueError("resolution must be >= 2 per axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", sh)

    @classmethod
    def box(cls, lower, upper, resolution) -> "GridDomain":
        lower = tuple(np.atleast_1d(np.asarray(lower, dtype=float)))
        upper = tuple(np.atleast_1d(np.asarray(upper, dtype=float)))
        res = np.broadcast_to(np.asarray(resolution, dtype=int), (len(lower),))
        return cls(lower, upper, tuple(int(r) for r in res))

    @classmethod
    def around(cls, center, halfwidth, resolution) -> "GridDomain":
        """Grid centred on ``center`` with ``center`` exactly at a cell centre.

        Resolutions are bumped to the next odd number so that the middle cell
        is centred on ``center``.
        """
        c = np.asarray(center, dtype=float)
        hw = np.broadcast_to(np.asarray(halfwidth, dtype=float), c.shape)
        res = np.broadcast_to(np.asarray(resolution, dtype=int), c.shape)
        res = np.where(res % 2 == 0, res + 1, res)
        return cls(tuple(c - hw), tuple(c + hw), tuple(int(r) for r in res))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(np.array(self.upper) - np.array(self.lower)))

    def axes(self) -> list[np.ndarray]:
        return [self.lower[i] + (np.arange(n) + 0.5) * self.spacing[i]
                for i, n in enumerate(self.shape)]

    def node_axes(self) -> list[np.ndarray]:
        return [np.linspace(self.lower[i], self.upper[i], n + 1)
                for i, n in enumerate(self.shape)]

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell centres with shape ``(*shape, N)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def flat_centers(self) -> np.ndarray:
        return self.centers.reshape(-1, self.ndim)

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.node_axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.ndim)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.array(self.lower)) and np.all(x <= np.array(self.upper)))

    def index_of(self, x) -> tuple[int, ...]:
        """Multi-index of the cell containing ``x`` (upper faces belong to the last cell)."""
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise ValueError(f"point {x.tolist()} outside grid {self.lower}..{self.upper}")
        idx = np.floor((x - np.array(self.lower)) / self.spacing).astype(int)
        idx = np.minimum(idx, np.array(self.shape) - 1)
        return tuple(int(i) for i in idx)

    def flat_index(self, x) -> int:
        return int(np.ravel_multi_index(self.index_of(x), self.shape))

    def center_of(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        return np.array(self.lower) + (idx + 0.5) * self.spacing

    def snap(self, x) -> np.ndarray:
        """Centre of the cell containing ``x``."""
        return self.center_of(self.index_of(x))

    def refine(self, factor: int = 2) -> "GridDomain":
        return GridDomain(self.lower, self.upper, tuple(s * factor for s in self.shape))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "shape": list(self.shape)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridDomain":
        return cls.box(d["lower"], d["upper"], d.get("shape", d.get("resolution")))
