"""Thresholding energy, movement distance and the minimizing-movement oracle.

All quantities are built on the bilinear form

    b(f, g) = 1/(sqrt(h) N) * sum_x f(x) (e^{-hL} g)(x)

with ``E(u) = b(1 - u, 1 + u)`` and ``movement(u, v) = b(u - v, u - v)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridGeometry, ObstacleSet, PHASE_DTYPE, same_geometry
from .heat import KernelSpectrum, apply_semigroup, build_spectrum, heat_matrix

PENALTY_WEIGHT = 4.0
ENUMERATION_MAX_CELLS = 16


@dataclass(frozen=True)
class EnergyReport:
    energy: float
    movement: float
    penalty: float

    @property
    def objective(self) -> float:
        return self.energy + self.movement + self.penalty


def bilinear(f: np.ndarray, g: np.ndarray, spec: KernelSpectrum) -> float:
    same_geometry(f, g, spec.multipliers)
    scale = 1.0 / (np.sqrt(spec.h) * f.size)
    return float(np.sum(np.asarray(f, dtype=np.float64) * apply_semigroup(g, spec))) * scale


def energy(u: np.ndarray, spec: KernelSpectrum) -> float:
    u = np.asarray(u, dtype=np.float64)
    return bilinear(1.0 - u, 1.0 + u, spec)


def movement(u: np.ndarray, u_prev: np.ndarray, spec: KernelSpectrum) -> float:
    d = np.asarray(u, dtype=np.float64) - np.asarray(u_prev, dtype=np.float64)
    if not d.any():
        return 0.0
    return bilinear(d, d, spec)


def obstacle_penalty(u: np.ndarray, obs: ObstacleSet, h: float) -> float:
    """``4/(sqrt(h) N) * sum((lower - u)_+ + (upper - u)_-)``; each violated cell costs
    ``8/(sqrt(h) N)``."""
    same_geometry(u, obs.phi)
    u = np.asarray(u, dtype=np.float64)
    below = np.maximum(obs.lower() - u, 0.0)
    above = np.maximum(u - obs.upper(), 0.0)
    return PENALTY_WEIGHT / (np.sqrt(h) * u.size) * float(np.sum(below + above))


def mm_objective(u: np.ndarray, u_prev: np.ndarray, obs: ObstacleSet, spec: KernelSpectrum
                 ) -> EnergyReport:
    return EnergyReport(energy(u, spec), movement(u, u_prev, spec),
                        obstacle_penalty(u, obs, spec.h))


def enumerate_objectives(u_prev: np.ndarray, obs: ObstacleSet, h: float
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Objective of every +-1 field on a grid of at most 16 cells.

    Uses the dense matrix exponential rather than the FFT, and evaluates the
    three terms as written (no expansion of the square). Returns
    ``(fields, objectives)`` with ``fields`` of shape ``(2**N, N)``.
    """
    geom = same_geometry(u_prev, obs.phi)
    N = geom.N
    if N > ENUMERATION_MAX_CELLS:
        raise ValueError(f"full enumeration limited to {ENUMERATION_MAX_CELLS} cells, "
                         f"grid has {N}")
    K = heat_matrix(h, geom)
    scale = 1.0 / (np.sqrt(h) * N)
    bits = (np.arange(2 ** N)[:, None] >> np.arange(N)[None, :]) & 1
    U = 2.0 * bits - 1.0
    prev = np.asarray(u_prev, dtype=np.float64).ravel()
    E = np.einsum("ki,ki->k", 1.0 - U, (1.0 + U) @ K) * scale
    D = U - prev
    M = np.einsum("ki,ki->k", D, D @ K) * scale
    lower = obs.lower().ravel().astype(np.float64)
    upper = obs.upper().ravel().astype(np.float64)
    P = (np.maximum(lower - U, 0.0) + np.maximum(U - upper, 0.0)).sum(axis=1)
    P *= PENALTY_WEIGHT * scale
    return U, E + M + P


def verify_minimizer(u_next: np.ndarray, u_prev: np.ndarray, obs: ObstacleSet,
                     spec: KernelSpectrum, *, mode: str = "full", tol: float = 1e-12) -> bool:
    """Check that ``u_next`` minimizes the penalized movement objective.

    ``mode="full"`` enumerates all ``2**N`` fields (N <= 16) and checks that
    ``u_next`` attains the minimum and is admissible. ``mode="certificate"``
    works at any size: after expanding the square the objective is
    ``const - 2 b(u, u_prev)`` plus the penalty, which separates over cells, so
    each cell must hold its own optimal sign (zero diffused value counts as -1).
    """
    geom = same_geometry(u_next, u_prev, obs.phi, spec.multipliers)
    if mode == "full":
        fields, objectives = enumerate_objectives(u_prev, obs, spec.h)
        best = objectives.min()
        idx = int(((np.asarray(u_next).ravel() + 1) // 2).astype(np.int64)
                  @ (1 << np.arange(geom.N)))
        return bool(objectives[idx] <= best + tol and obs.admissible(u_next))
    if mode == "certificate":
        g = apply_semigroup(u_prev, spec)
        # per-cell cost difference  cost(+1) - cost(-1), in units of 1/(sqrt(h) N)
        diff = -4.0 * g - 8.0 * obs.phi + 8.0 * obs.psi
        expected = np.where(diff < 0, 1, -1).astype(PHASE_DTYPE)
        return bool(np.array_equal(np.asarray(u_next), expected) and obs.admissible(u_next))
    raise ValueError(f"unknown mode {mode!r}")


def minimizers(u_prev: np.ndarray, obs: ObstacleSet, h: float, tol: float = 1e-12
               ) -> np.ndarray:
    """All fields within ``tol`` of the enumerated minimum, shape ``(k, n, n)``."""
    geom = same_geometry(u_prev)
    fields, objectives = enumerate_objectives(u_prev, obs, h)
    hit = objectives <= objectives.min() + tol
    return fields[hit].reshape(-1, *geom.shape).astype(PHASE_DTYPE)


def band_energy_profile(widths, n: int, h: float) -> list[float]:
    """Energy of axis-aligned bands ``{0 <= x < w}`` on an ``n x n`` grid."""
    geom = GridGeometry(n)
    spec = build_spectrum(h, geom)
    out = []
    for w in widths:
        u = -np.ones(geom.shape, dtype=PHASE_DTYPE)
        u[: int(round(w * n)), :] = 1
        out.append(energy(u, spec))
    return out

