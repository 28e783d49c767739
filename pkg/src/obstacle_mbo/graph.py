"""Thresholding on point clouds: random geometric graph Laplacians and a dense
heat semigroup.

The graph Laplacian is

    (L u)(x) = 1/N * sum_y w(x, y) (u(x) - u(y)) / eps**2,
    w(x, y)  = eta(|x - y| / eps) / eps**2

with ``eta`` the indicator of ``[0, 1]`` and periodic distances on the unit
torus. On the uniform grid with ``eps`` equal to the spacing this is exactly
the five-point Laplacian.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse.csgraph

from .grid import PHASE_DTYPE, GridGeometry, ObstacleOverlap, threshold

log = logging.getLogger(__name__)

DENSE_MAX_NODES = 5000
# relative slack on the cutoff so that grid neighbours at exactly eps survive rounding
CUTOFF_SLACK = 1e-9

KERNELS = {
    # second moment 1/2 * int_{|z|<=1} z_1^2 dz of the kernel in 2-d
    "indicator": np.pi / 8,
}


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError(f"need at least two 2-d points, got shape {pts.shape}")
        if np.any(pts < 0) or np.any(pts >= 1):
            raise ValueError("points must lie in [0, 1)^2")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_grid(cls, geometry: GridGeometry) -> "PointCloud":
        x, y = geometry.coordinates()
        return cls(np.column_stack([x.ravel(), y.ravel()]))


def sample_cloud(N: int, seed: int) -> PointCloud:
    if N < 2:
        raise ValueError("a cloud needs at least two points")
    rng = np.random.default_rng(seed)
    return PointCloud(rng.random((N, 2)), seed)


def save_cloud(cloud: PointCloud, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in cloud.points:
            w.writerow([f"{x:.17g}", f"{y:.17g}"])


def load_cloud(path) -> PointCloud:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "y"]:
        raise ValueError(f"{path}: expected header 'x,y'")
    return PointCloud(np.array([[float(a), float(b)] for a, b in rows[1:]]))


def periodic_distances(points: np.ndarray) -> np.ndarray:
    d = np.abs(points[:, None, :] - points[None, :, :])
    d = np.minimum(d, 1.0 - d)
    return np.sqrt((d ** 2).sum(axis=-1))


@dataclass(frozen=True, eq=False)
class GraphLaplacian:
    matrix: np.ndarray
    eps: float
    kernel: str = "indicator"
    connected: bool = True

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def second_moment(self) -> float:
        """Constant ``sigma`` with ``L -> sigma * (-Laplacian)`` in the continuum limit."""
        return KERNELS[self.kernel]


def build_graph_laplacian(cloud: PointCloud, eps: float, kernel: str = "indicator"
                          ) -> GraphLaplacian:
    if not 0 < eps < 0.5:
        raise ValueError(f"graph length scale must lie in (0, 0.5), got {eps}")
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; available: {sorted(KERNELS)}")
    N = len(cloud)
    dist = periodic_distances(cloud.points)
    adj = dist <= eps * (1.0 + CUTOFF_SLACK)
    np.fill_diagonal(adj, False)
    coef = 1.0 / (N * eps ** 2 * eps ** 2)
    W = adj * coef
    L = np.diag(W.sum(axis=1)) - W
    n_comp = scipy.sparse.csgraph.connected_components(adj, directed=False)[0]
    if n_comp > 1:
        log.warning("graph has %d connected components", n_comp)
    L.flags.writeable = False
    return GraphLaplacian(L, float(eps), kernel, n_comp == 1)


class GraphSemigroup:
    """``exp(-h L)`` from one symmetric eigendecomposition, reusable across steps."""

    def __init__(self, lap: GraphLaplacian, h: float):
        if lap.N > DENSE_MAX_NODES:
            raise ValueError(f"dense semigroup limited to {DENSE_MAX_NODES} nodes, "
                             f"graph has {lap.N}")
        if not h > 0:
            raise ValueError(f"h must be positive, got {h}")
        lam, V = scipy.linalg.eigh(lap.matrix)
        self.h = h
        self._V = V
        self._decay = np.exp(-h * np.maximum(lam, 0.0))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        return self._V @ (self._decay * (self._V.T @ u))

    def matrix(self) -> np.ndarray:
        return (self._V * self._decay) @ self._V.T


def graph_semigroup(u: np.ndarray, lap: GraphLaplacian, h: float) -> np.ndarray:
    return GraphSemigroup(lap, h)(u)


def graph_mbo_step(u: np.ndarray, phi: np.ndarray, psi: np.ndarray,
                   semigroup: GraphSemigroup) -> np.ndarray:
    phi = np.asarray(phi, dtype=bool)
    psi = np.asarray(psi, dtype=bool)
    overlap = int(np.count_nonzero(phi & psi))
    if overlap:
        raise ObstacleOverlap(overlap)
    out = threshold(semigroup(u))
    out[phi] = 1
    out[psi] = -1
    return out


def graph_energy(u: np.ndarray, semigroup: GraphSemigroup) -> float:
    u = np.asarray(u, dtype=np.float64)
    return float((1 - u) @ semigroup(1 + u)) / (np.sqrt(semigroup.h) * len(u))


def graph_movement(u: np.ndarray, u_prev: np.ndarray, semigroup: GraphSemigroup) -> float:
    d = np.asarray(u, dtype=np.float64) - u_prev
    return float(d @ semigroup(d)) / (np.sqrt(semigroup.h) * len(u))


def nearest_cells(points: np.ndarray, geometry: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Index of the grid point nearest to each node (periodic)."""
    idx = np.rint(points * geometry.n).astype(np.int64) % geometry.n
    return idx[:, 0], idx[:, 1]


def mean_field_gap(cloud: PointCloud, eps: float, reference: list[np.ndarray],
                   u0: np.ndarray, phi: np.ndarray, psi: np.ndarray, h: float,
                   steps: int, time_scale: Optional[float] = None) -> float:
    """Fraction of nodes whose value after ``steps`` graph iterations differs
    from the nearest-cell value of a grid reference trajectory.

    ``reference[k]`` is the grid iterate after ``k`` steps. The graph runs for
    time ``h * time_scale``; the default ``1 / sigma`` makes a random geometric
    graph approximate the same heat flow as the grid. Pass ``1.0`` when the
    cloud is the grid itself.
    """
    geom = GridGeometry.of(reference[0])
    ci, cj = nearest_cells(cloud.points, geom)
    u = np.asarray(u0, dtype=PHASE_DTYPE)
    if steps:
        lap = build_graph_laplacian(cloud, eps)
        scale = 1.0 / lap.second_moment if time_scale is None else time_scale
        sg = GraphSemigroup(lap, h * scale)
        for _ in range(steps):
            u = graph_mbo_step(u, phi, psi, sg)
    return float(np.mean(u != reference[steps][ci, cj]))
