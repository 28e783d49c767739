"""Heat semigroup of the periodic five-point Laplacian.

The finite-difference Laplacian on the torus is diagonal in the discrete
Fourier basis, so ``exp(-h L)`` is a pointwise multiplication of the 2-d FFT
by ``exp(2 N h (cos(2 pi i / n) + cos(2 pi j / n) - 2))``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg

from .grid import GridGeometry, same_geometry

DIRECT_MAX_CELLS = 4096
IMAG_TOLERANCE = 1e-9


def fft_workers() -> int:
    """Worker threads for the transforms, capped by ``OBSTACLE_MBO_THREADS``."""
    try:
        return max(1, int(os.environ.get("OBSTACLE_MBO_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class KernelSpectrum:
    h: float
    multipliers: np.ndarray

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry.of(self.multipliers)

    @property
    def half(self) -> np.ndarray:
        """Multipliers on the non-negative frequencies of the last axis (rfft layout)."""
        n = self.multipliers.shape[1]
        return self.multipliers[:, : n // 2 + 1]


def build_spectrum(h: float, geometry: GridGeometry) -> KernelSpectrum:
    if not h > 0:
        raise ValueError(f"diffusion time h must be positive, got {h}")
    n = geometry.n
    c = np.cos(2 * np.pi * np.arange(n) / n)
    # exp(0) is exactly 1, so constants are fixed points without extra normalization
    m = np.exp(2.0 * geometry.N * h * (c[:, None] + c[None, :] - 2.0))
    m.flags.writeable = False
    return KernelSpectrum(float(h), m)


def apply_semigroup(u: np.ndarray, spec: KernelSpectrum, *, complex_check: bool = False
                    ) -> np.ndarray:
    """``exp(-h L) u`` via FFT.

    The default path uses the real transform. With ``complex_check`` the full
    complex transform is used and a non-negligible imaginary residue raises.
    """
    spec.geometry.check(u)
    u = np.asarray(u, dtype=np.float64)
    workers = fft_workers()
    if not complex_check:
        coeffs = scipy.fft.rfft2(u, workers=workers)
        coeffs *= spec.half
        return scipy.fft.irfft2(coeffs, s=u.shape, workers=workers, overwrite_x=True)
    out = scipy.fft.ifft2(scipy.fft.fft2(u, workers=workers) * spec.multipliers,
                          workers=workers)
    residue = np.max(np.abs(out.imag))
    if residue > IMAG_TOLERANCE:
        raise RuntimeError(f"imaginary residue {residue:.3e} after inverse transform")
    return out.real.copy()


def laplacian_matrix(geometry: GridGeometry) -> np.ndarray:
    """Dense ``N x N`` matrix of the positive periodic five-point Laplacian,
    with cells numbered row-major."""
    n = geometry.n
    idx = np.arange(geometry.N).reshape(n, n)
    L = np.zeros((geometry.N, geometry.N))
    inv = 1.0 / geometry.eps ** 2
    for shift in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = np.roll(idx, shift, axis=(0, 1)).ravel()
        np.add.at(L, (idx.ravel(), nb), -inv)
    L[np.diag_indices_from(L)] += 4 * inv
    return L


def heat_matrix(h: float, geometry: GridGeometry) -> np.ndarray:
    if geometry.N > DIRECT_MAX_CELLS:
        raise ValueError(f"dense heat matrix limited to {DIRECT_MAX_CELLS} cells, "
                         f"grid has {geometry.N}")
    return _heat_matrix(float(h), geometry.n)


@lru_cache(maxsize=2)
def _heat_matrix(h: float, n: int) -> np.ndarray:
    K = scipy.linalg.expm(-h * laplacian_matrix(GridGeometry(n)))
    K.flags.writeable = False
    return K


def apply_semigroup_direct(u: np.ndarray, h: float, geometry: GridGeometry | None = None
                           ) -> np.ndarray:
    """Reference path: dense matrix exponential of the Laplacian applied to ``u``."""
    geometry = geometry or same_geometry(u)
    geometry.check(u)
    K = heat_matrix(h, geometry)
    return (K @ np.asarray(u, dtype=np.float64).ravel()).reshape(geometry.shape)
