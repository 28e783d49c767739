"""Periodic unit-torus grids, +-1 phase fields and obstacle masks.

Fields are plain numpy arrays of shape ``(n, n)``. Cell ``(i, j)`` sits at the
torus point ``(i/n, j/n)``. Phase fields use ``int8`` with values -1/+1,
masks are boolean.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PHASE_DTYPE = np.int8


class GeometryMismatch(ValueError):
    """Raised when arrays do not live on the same grid."""


class ObstacleOverlap(ValueError):
    """Raised when the inner and outer obstacle share a cell."""

    def __init__(self, count: int):
        super().__init__(f"obstacles overlap in {count} cell(s)")
        self.count = count


@dataclass(frozen=True)
class GridGeometry:
    """Uniform ``n x n`` grid on the unit torus."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid side must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def eps(self) -> float:
        return 1.0 / self.n

    @property
    def N(self) -> int:
        return self.n * self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Corner-anchored coordinates ``(x, y)`` of every cell, each ``(n, n)``."""
        t = np.arange(self.n) / self.n
        return np.meshgrid(t, t, indexing="ij")

    def check(self, *arrays: np.ndarray) -> None:
        for a in arrays:
            if np.shape(a) != self.shape:
                raise GeometryMismatch(
                    f"array of shape {np.shape(a)} does not match grid {self.shape}")

    @classmethod
    def of(cls, field: np.ndarray) -> "GridGeometry":
        shape = np.shape(field)
        if len(shape) != 2 or shape[0] != shape[1]:
            raise GeometryMismatch(f"expected a square 2-d field, got shape {shape}")
        return cls(shape[0])


def same_geometry(*arrays: np.ndarray) -> GridGeometry:
    geom = GridGeometry.of(arrays[0])
    geom.check(*arrays[1:])
    return geom


@dataclass(frozen=True, eq=False)
class ObstacleSet:
    """Inner obstacle ``phi`` (forced to +1) and outer obstacle ``psi`` (forced to -1)."""

    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=bool)
        psi = np.asarray(self.psi, dtype=bool)
        same_geometry(phi, psi)
        overlap = int(np.count_nonzero(phi & psi))
        if overlap:
            raise ObstacleOverlap(overlap)
        phi.flags.writeable = False
        psi.flags.writeable = False
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def empty(cls, geometry: GridGeometry) -> "ObstacleSet":
        return cls(np.zeros(geometry.shape, bool), np.zeros(geometry.shape, bool))

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry.of(self.phi)

    @property
    def is_empty(self) -> bool:
        return not (self.phi.any() or self.psi.any())

    def swapped(self) -> "ObstacleSet":
        return ObstacleSet(self.psi, self.phi)

    def shifted(self, di: int, dj: int) -> "ObstacleSet":
        return ObstacleSet(np.roll(self.phi, (di, dj), (0, 1)),
                           np.roll(self.psi, (di, dj), (0, 1)))

    def lower(self) -> np.ndarray:
        """+1 on the inner obstacle, -1 elsewhere."""
        return np.where(self.phi, 1, -1).astype(PHASE_DTYPE)

    def upper(self) -> np.ndarray:
        """-1 on the outer obstacle, +1 elsewhere."""
        return np.where(self.psi, -1, 1).astype(PHASE_DTYPE)

    def admissible(self, u: np.ndarray) -> bool:
        return bool(np.all(u[self.phi] == 1) and np.all(u[self.psi] == -1))


def torus_distance(x: np.ndarray, y: np.ndarray, cx: float, cy: float) -> np.ndarray:
    dx = np.abs(x - cx) % 1.0
    dy = np.abs(y - cy) % 1.0
    dx = np.minimum(dx, 1.0 - dx)
    dy = np.minimum(dy, 1.0 - dy)
    return np.hypot(dx, dy)


def rasterize_disks(centers: Iterable[Sequence[float]], radius: float,
                    geometry: GridGeometry) -> np.ndarray:
    """Mask of grid points within periodic distance ``radius`` of any center.

    Only a bounding box around each disk is touched, so the cost is
    proportional to the total disk area rather than ``len(centers) * N``.
    """
    if not 0 < radius < 0.5:
        raise ValueError(f"disk radius must lie in (0, 0.5), got {radius}")
    n = geometry.n
    mask = np.zeros(geometry.shape, dtype=bool)
    reach = int(np.ceil(radius * n)) + 1
    # a window wider than the grid would repeat indices and lose writes
    offsets = np.arange(-reach, reach + 1) if 2 * reach + 1 < n else None
    for cx, cy in centers:
        if offsets is None:
            ii = jj = np.arange(n)
        else:
            ii = (int(np.floor(cx * n)) + offsets) % n
            jj = (int(np.floor(cy * n)) + offsets) % n
        x, y = np.meshgrid(ii / n, jj / n, indexing="ij")
        inside = torus_distance(x, y, cx, cy) <= radius
        mask[np.ix_(ii, jj)] |= inside
    return mask


def rasterize_stadium(a: Sequence[float], b: Sequence[float], radius: float,
                      geometry: GridGeometry) -> np.ndarray:
    """Mask of points within ``radius`` of the segment ``a-b`` (the convex hull
    of two equal disks). Not periodic; the segment must stay away from the seam."""
    x, y = geometry.coordinates()
    ax, ay = a
    bx, by = b
    vx, vy = bx - ax, by - ay
    t = ((x - ax) * vx + (y - ay) * vy) / (vx * vx + vy * vy)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(x - ax - t * vx, y - ay - t * vy) <= radius


def phase_from_mask(mask: np.ndarray) -> np.ndarray:
    return np.where(mask, 1, -1).astype(PHASE_DTYPE)


def clamp_to_obstacles(u: np.ndarray, obs: ObstacleSet) -> np.ndarray:
    """Force +1 on the inner obstacle and -1 on the outer one."""
    obs.geometry.check(u)
    out = np.array(u, copy=True)
    out[obs.phi] = 1
    out[obs.psi] = -1
    return out


def threshold(v: np.ndarray) -> np.ndarray:
    """+1 where ``v > 0``, -1 otherwise (zero maps to -1)."""
    out = (np.asarray(v) > 0).astype(PHASE_DTYPE)
    out *= 2
    out -= 1
    return out


def field_leq(a: np.ndarray, b: np.ndarray) -> bool:
    same_geometry(a, b)
    return bool(np.all(a <= b))


def area_fraction(u: np.ndarray) -> float:
    return np.count_nonzero(u == 1) / u.size
