"""Self-check suites: exhaustive minimizer oracle, spectral versus dense
semigroup, comparison principle and volume-constrained runs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import energy, movement, verify_minimizer
from .grid import (GridGeometry, ObstacleSet, PHASE_DTYPE, field_leq, phase_from_mask,
                   rasterize_disks)
from .heat import apply_semigroup, apply_semigroup_direct, build_spectrum
from .scheme import SchemeConfig, mbo_step, run, volume_step

DISSIPATION_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    violations: int = 0
    dissipation_checked: int = 0
    dissipation_violations: int = 0
    notes: list[str] = field(default_factory=list)
    max_error: float = 0.0

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.dissipation_violations == 0

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f", max error {self.max_error:.2e}" if self.max_error else ""
        return (f"[{status}] {self.name}: {self.checked} checks, {self.violations} violations; "
                f"dissipation {self.dissipation_checked} steps, "
                f"{self.dissipation_violations} violations{extra}")


def random_phase(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.choice(np.array([-1, 1], dtype=PHASE_DTYPE), size=shape)


def random_obstacles(rng: np.random.Generator, shape, density: float = 0.15) -> ObstacleSet:
    """Disjoint random masks, each cell in ``phi`` or ``psi`` with probability ``density``."""
    r = rng.random(shape)
    return ObstacleSet(r < density, (r >= density) & (r < 2 * density))


def random_disk_obstacles(rng: np.random.Generator, geom: GridGeometry, count: int,
                          radius: float) -> ObstacleSet:
    """Random disk obstacles; outer-obstacle cells win where the disks overlap."""
    phi = rasterize_disks(rng.random((count, 2)), radius, geom)
    psi = rasterize_disks(rng.random((count, 2)), radius, geom)
    return ObstacleSet(phi & ~psi, psi)


def _dissipates(result: SuiteResult, u_next, u, spec, obs) -> None:
    """Count one dissipation check when ``u`` is an admissible competitor."""
    if not obs.admissible(u):
        return
    result.dissipation_checked += 1
    if energy(u_next, spec) + movement(u_next, u, spec) > energy(u, spec) + DISSIPATION_TOL:
        result.dissipation_violations += 1


def minimizer_suite(instances: int = 100, n: int = 4, hs=(0.01, 0.1), seed: int = 0
                    ) -> SuiteResult:
    """Every obstacle MBO step is a global minimizer of the penalized objective
    among all ``2**(n*n)`` fields, and is admissible."""
    rng = np.random.Generator(np.random.PCG64(seed))
    geom = GridGeometry(n)
    result = SuiteResult("minimizer")
    for k in range(instances):
        h = hs[k % len(hs)]
        spec = build_spectrum(h, geom)
        u_prev = random_phase(rng, geom.shape)
        obs = random_obstacles(rng, geom.shape)
        u_next = mbo_step(u_prev, obs, spec)
        result.checked += 1
        if not (verify_minimizer(u_next, u_prev, obs, spec, mode="full")
                and verify_minimizer(u_next, u_prev, obs, spec, mode="certificate")):
            result.violations += 1
            result.notes.append(f"instance {k}: step output is not a minimizer")
        # a second step starts from an admissible state
        _dissipates(result, mbo_step(u_next, obs, spec), u_next, spec, obs)
    return result


def spectral_suite(sizes=(2, 4, 8, 16, 32), fields: int = 20, h: float = 0.003,
                   tol: float = 1e-10, seed: int = 0) -> SuiteResult:
    rng = np.random.Generator(np.random.PCG64(seed))
    result = SuiteResult("spectral")
    for n in sizes:
        geom = GridGeometry(n)
        spec = build_spectrum(h, geom)
        for _ in range(fields):
            u = rng.uniform(-1, 1, geom.shape)
            err = float(np.max(np.abs(apply_semigroup(u, spec)
                                      - apply_semigroup_direct(u, h, geom))))
            result.max_error = max(result.max_error, err)
            result.checked += 1
            if err > tol:
                result.violations += 1
                result.notes.append(f"n={n}: error {err:.3e}")
    return result


def monotonicity_suite(pairs: int = 200, n: int = 64, steps: int = 50, h: float = 2e-4,
                       seed: int = 0) -> SuiteResult:
    """Ordered initial pairs with shared obstacles stay ordered at every step."""
    rng = np.random.Generator(np.random.PCG64(seed))
    geom = GridGeometry(n)
    spec = build_spectrum(h, geom)
    result = SuiteResult("monotonicity")
    for k in range(pairs):
        obs = random_disk_obstacles(rng, geom, 3, 0.07)
        lo = phase_from_mask(rasterize_disks(rng.random((6, 2)), 0.1, geom))
        hi = np.maximum(lo, random_phase(rng, geom.shape) if k % 2 else
                        phase_from_mask(rasterize_disks(rng.random((6, 2)), 0.1, geom)))
        for step in range(steps):
            lo_next, hi_next = mbo_step(lo, obs, spec), mbo_step(hi, obs, spec)
            result.checked += 1
            if not field_leq(lo_next, hi_next):
                result.violations += 1
                result.notes.append(f"pair {k}, step {step + 1}: order broken")
            if step:
                _dissipates(result, lo_next, lo, spec, obs)
                _dissipates(result, hi_next, hi, spec, obs)
            lo, hi = lo_next, hi_next
    return result


def volume_suite(runs: int = 50, n: int = 32, steps: int = 20, h: float = 1e-3,
                 seed: int = 0) -> SuiteResult:
    """Volume-constrained runs keep ``|{u = 1}| = V``, stay admissible and do not
    increase energy plus movement against the previous (admissible) state."""
    rng = np.random.Generator(np.random.PCG64(seed))
    geom = GridGeometry(n)
    spec = build_spectrum(h, geom)
    result = SuiteResult("volume")
    for k in range(runs):
        obs = random_disk_obstacles(rng, geom, 2, 0.06)
        lo = int(np.count_nonzero(obs.phi))
        hi = geom.N - int(np.count_nonzero(obs.psi))
        volume = int(rng.integers(lo, hi + 1))
        u = phase_from_mask(rasterize_disks(rng.random((4, 2)), 0.15, geom))
        for step in range(steps):
            u_next = volume_step(u, obs, spec, volume)
            result.checked += 1
            if np.count_nonzero(u_next == 1) != volume or not obs.admissible(u_next):
                result.violations += 1
                result.notes.append(f"run {k}, step {step + 1}: volume or obstacle violated")
            if step:
                _dissipates(result, u_next, u, spec, obs)
            u = u_next
    return result


def run_dissipation(u0, obs, h, max_iters=200) -> SuiteResult:
    """Dissipation along a full ``run``, using its recorded energies."""
    _, record = run(u0, obs, SchemeConfig(h=h, max_iters=max_iters))
    result = SuiteResult("run")
    result.dissipation_checked = max(0, len(record.energy) - 1)
    result.dissipation_violations = len(record.dissipation_violations(DISSIPATION_TOL))
    return result


SUITES = {
    "minimizer": minimizer_suite,
    "spectral": spectral_suite,
    "monotonicity": monotonicity_suite,
    "volume": volume_suite,
}
