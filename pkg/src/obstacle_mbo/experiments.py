"""Numerical experiments: random-disk invasion runs, the three-disk steady-state
study, the runtime benchmark and the point-cloud convergence check."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.ndimage

from .grid import (GridGeometry, ObstacleSet, area_fraction, phase_from_mask,
                   rasterize_disks, rasterize_stadium, torus_distance)
from .graph import PointCloud, mean_field_gap, sample_cloud
from .heat import build_spectrum
from .scheme import RunRecord, SchemeConfig, mbo_step, run

log = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"


def connected_components(u: np.ndarray) -> tuple[int, np.ndarray]:
    """4-connected components of ``{u = +1}`` on the torus.

    Returns ``(count, labels)`` with labels ``1..count`` and 0 off the phase.
    """
    labels, count = scipy.ndimage.label(u == 1)
    if count == 0:
        return 0, labels
    parent = np.arange(count + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # glue labels that touch across the periodic seams
    for a_edge, b_edge in ((labels[0, :], labels[-1, :]), (labels[:, 0], labels[:, -1])):
        both = (a_edge > 0) & (b_edge > 0)
        for a, b in zip(a_edge[both], b_edge[both]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(k) for k in range(count + 1)])
    uniq, relabel = np.unique(roots[1:], return_inverse=True)
    lut = np.concatenate([[0], relabel + 1])
    return len(uniq), lut[labels]


# ---------------------------------------------------------------- invasion

@dataclass
class InvasionConfig:
    A_syst: float = 400.0
    C: float = 0.3
    n: int = 1024
    h: Optional[float] = None
    seed: int = 1
    padding_width: Optional[int] = None
    max_iters: int = 4000
    snapshot_stride: int = 0

    def __post_init__(self):
        if not 0 < self.C < 1:
            raise ValueError(f"concentration C must lie in (0, 1), got {self.C}")
        if not self.A_syst > 1:
            raise ValueError(f"A_syst must exceed 1, got {self.A_syst}")
        if self.h is not None and not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.padding_width is not None and self.padding_width < 0:
            raise ValueError("padding_width must be non-negative")

    @property
    def r_d(self) -> float:
        return math.sqrt(1.0 / (math.pi * self.A_syst))

    @property
    def N_d(self) -> int:
        return int(round(self.C * self.A_syst))

    @property
    def diffusion_time(self) -> float:
        # kernel width sqrt(h) a quarter of the disk radius
        return self.h if self.h is not None else self.r_d ** 2 / 16

    @property
    def padding(self) -> int:
        if self.padding_width is not None:
            return self.padding_width
        return int(math.ceil(4 * math.sqrt(self.diffusion_time) * self.n))


@dataclass
class InvasionSetup:
    u0: np.ndarray
    obstacles: ObstacleSet
    centers: np.ndarray


def invasion_setup(cfg: InvasionConfig) -> InvasionSetup:
    """Sample disk centers, rasterize them as initial phase and inner obstacle,
    and surround the box with an outer-obstacle frame of ``cfg.padding`` cells
    at the seam."""
    geom = GridGeometry(cfg.n)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    pad = cfg.padding
    eps = geom.eps
    if pad:
        lo, hi = pad * eps + cfg.r_d, 1.0 - cfg.r_d - eps
        if lo >= hi:
            raise ValueError("padding frame leaves no room for the disks")
        centers = lo + (hi - lo) * rng.random((cfg.N_d, 2))
    else:
        centers = rng.random((cfg.N_d, 2))
    disks = rasterize_disks(centers, cfg.r_d, geom)
    frame = np.zeros(geom.shape, dtype=bool)
    frame[:pad, :] = True
    frame[:, :pad] = True
    # raises ObstacleOverlap if a disk reaches into the frame
    obs = ObstacleSet(disks, frame)
    return InvasionSetup(phase_from_mask(disks), obs, centers)


def invasion_run(cfg: InvasionConfig,
                 on_snapshot: Optional[Callable[[int, np.ndarray], None]] = None
                 ) -> tuple[np.ndarray, RunRecord, InvasionSetup]:
    setup = invasion_setup(cfg)
    scheme = SchemeConfig(h=cfg.diffusion_time, max_iters=cfg.max_iters,
                          snapshot_stride=cfg.snapshot_stride)
    final, record = run(setup.u0, setup.obstacles, scheme, seed=cfg.seed,
                        on_snapshot=on_snapshot)
    record.config.update(A_syst=cfg.A_syst, C=cfg.C, n=cfg.n, padding_width=cfg.padding,
                         r_d=cfg.r_d, N_d=cfg.N_d, rng=RNG_ALGORITHM)
    return final, record, setup


# ---------------------------------------------------------- steady states

@dataclass
class SteadyStateStudyConfig:
    """Two touching disks on the left, one disk on the right.

    The left pair is centered at ``x = left_x`` and ``y = 1/2 -+ radius``; the
    right disk sits at ``y = 1/2`` with ``gap`` between its edge and the pair.
    """
    n: int = 1000
    radius: float = 1.0 / 6.0
    left_x: float = 0.32
    gap: float = 0.1
    hs: Sequence[float] = (1e-5, 8.5e-4, 9e-4)
    expected: Sequence[str] = ("pinned", "hull", "merged")
    max_iters: int = 20000

    def __post_init__(self):
        if not 0 < self.radius < 0.5:
            raise ValueError("radius must lie in (0, 0.5)")
        if not self.gap > 0:
            raise ValueError("gap must be positive")
        if len(self.expected) not in (0, len(self.hs)):
            raise ValueError("expected regimes must match the list of h values")
        if self.right_center[0] + self.radius >= 1.0:
            raise ValueError("right disk leaves the unit box")

    @property
    def left_centers(self) -> list[tuple[float, float]]:
        return [(self.left_x, 0.5 - self.radius), (self.left_x, 0.5 + self.radius)]

    @property
    def right_center(self) -> tuple[float, float]:
        return (self.left_x + 2 * self.radius + self.gap, 0.5)

    @property
    def hull_area(self) -> float:
        r = self.radius
        return math.pi * r * r + (2 * r) * (2 * r)


@dataclass
class StudyRow:
    h: float
    iterations: int
    termination: str
    components: int
    hull_error: float
    area_fraction_final: float
    area_fraction_initial: float
    energy_violations: int = 0
    final: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def area_change(self) -> float:
        return abs(self.area_fraction_final - self.area_fraction_initial) / self.area_fraction_initial

    @property
    def regime(self) -> str:
        if self.components == 1:
            return "merged"
        return "pinned" if self.area_change <= 0.01 else "hull"


def study_setup(cfg: SteadyStateStudyConfig) -> tuple[np.ndarray, ObstacleSet, np.ndarray]:
    """Initial field (= inner obstacle) and the continuum steady state: the hull
    of the left pair together with the right disk."""
    geom = GridGeometry(cfg.n)
    disks = rasterize_disks(cfg.left_centers + [cfg.right_center], cfg.radius, geom)
    a, b = cfg.left_centers
    target = rasterize_stadium(a, b, cfg.radius, geom) | rasterize_disks(
        [cfg.right_center], cfg.radius, geom)
    return phase_from_mask(disks), ObstacleSet(disks, np.zeros(geom.shape, bool)), target


def study_one(cfg: SteadyStateStudyConfig, h: float, keep_state: bool = False) -> StudyRow:
    u0, obs, target = study_setup(cfg)
    final, record = run(u0, obs, SchemeConfig(h=h, max_iters=cfg.max_iters))
    count, _ = connected_components(final)
    eps2 = 1.0 / cfg.n ** 2
    sym = np.count_nonzero((final == 1) ^ target) * eps2
    return StudyRow(h=h, iterations=record.iterations_run, termination=record.termination,
                    components=count, hull_error=sym / cfg.hull_area,
                    area_fraction_final=area_fraction(final),
                    area_fraction_initial=area_fraction(u0),
                    energy_violations=len(record.dissipation_violations()),
                    final=final if keep_state else None)


def steady_state_study(cfg: SteadyStateStudyConfig, workers: int = 1,
                       keep_states: bool = False) -> list[StudyRow]:
    """Run every ``h`` to a steady state; independent runs may use a thread pool."""
    if workers <= 1:
        return [study_one(cfg, h, keep_states) for h in cfg.hs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda h: study_one(cfg, h, keep_states), cfg.hs))


# --------------------------------------------------------------- benchmark

@dataclass
class BenchRow:
    n: int
    N: int
    seconds_per_iter: float


def bench(sizes: Sequence[int], h: float = 1e-4, iters: int = 100, seed: int = 0
          ) -> list[BenchRow]:
    """Mean wall time of one obstacle MBO step on ``n x n`` grids.

    The state is a field of random disks that also serve as inner obstacle;
    one untimed warm-up step precedes the timed loop.
    """
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    rows = []
    for n in sizes:
        geom = GridGeometry(n)
        rng = np.random.Generator(np.random.PCG64(seed))
        disks = rasterize_disks(rng.random((40, 2)), 0.03, geom)
        obs = ObstacleSet(disks, np.zeros(geom.shape, bool))
        spec = build_spectrum(h, geom)
        u = phase_from_mask(disks)
        u = mbo_step(u, obs, spec)
        t0 = time.perf_counter()
        for _ in range(iters):
            u = mbo_step(u, obs, spec)
        dt = (time.perf_counter() - t0) / iters
        log.info("n=%d: %.3g s/iter", n, dt)
        rows.append(BenchRow(n, geom.N, dt))
    return rows


def loglog_slope(rows: Sequence[BenchRow]) -> float:
    x = np.log([r.N for r in rows])
    y = np.log([r.seconds_per_iter for r in rows])
    return float(np.polyfit(x, y, 1)[0])


# ------------------------------------------------------ point-cloud check

@dataclass
class MeanFieldConfig:
    """Disk initial data with one inner and one outer disk obstacle, evolved
    ``steps`` times on a fine grid and on random geometric graphs."""
    h: float = 0.01
    steps: int = 5
    reference_n: int = 256
    phase: tuple = ((0.5, 0.5), 0.35)
    inner: tuple = ((0.3, 0.5), 0.08)
    outer: tuple = ((0.75, 0.55), 0.07)
    eps_500: float = 0.12
    eps_exponent: float = 0.25

    def graph_eps(self, N: int) -> float:
        """Connectivity length, shrinking like ``N ** -eps_exponent``."""
        return self.eps_500 * (N / 500) ** (-self.eps_exponent)


def _in_disk(points: np.ndarray, disk) -> np.ndarray:
    (cx, cy), r = disk
    return torus_distance(points[:, 0], points[:, 1], cx, cy) <= r


def mean_field_reference(cfg: MeanFieldConfig) -> list[np.ndarray]:
    geom = GridGeometry(cfg.reference_n)
    spec = build_spectrum(cfg.h, geom)
    u = phase_from_mask(rasterize_disks([cfg.phase[0]], cfg.phase[1], geom))
    obs = ObstacleSet(rasterize_disks([cfg.inner[0]], cfg.inner[1], geom),
                      rasterize_disks([cfg.outer[0]], cfg.outer[1], geom))
    traj = [u]
    for _ in range(cfg.steps):
        traj.append(mbo_step(traj[-1], obs, spec))
    return traj


def cloud_gap(cfg: MeanFieldConfig, cloud: PointCloud, reference: list[np.ndarray],
              eps: float, steps: Optional[int] = None,
              time_scale: Optional[float] = None) -> float:
    pts = cloud.points
    u0 = np.where(_in_disk(pts, cfg.phase), 1, -1).astype(np.int8)
    return mean_field_gap(cloud, eps, reference, u0, _in_disk(pts, cfg.inner),
                          _in_disk(pts, cfg.outer), cfg.h,
                          cfg.steps if steps is None else steps, time_scale)


def mean_field_sweep(cfg: MeanFieldConfig, sizes: Sequence[int] = (500, 1000, 2000),
                     seeds: Sequence[int] = tuple(range(10))) -> dict[int, list[float]]:
    """Gap per seed for each cloud size."""
    reference = mean_field_reference(cfg)
    return {N: [cloud_gap(cfg, sample_cloud(N, s), reference, cfg.graph_eps(N))
                for s in seeds]
            for N in sizes}
