"""Obstacle MBO: thresholding dynamics for mean curvature flow with inner and
outer obstacles on periodic grids and on point clouds."""

__version__ = "0.1.0"

from .grid import (GridGeometry, ObstacleSet, clamp_to_obstacles, field_leq,
                   rasterize_disks, threshold)
from .heat import KernelSpectrum, apply_semigroup, apply_semigroup_direct, build_spectrum
from .scheme import (RunRecord, SchemeConfig, mbo_step, mbo_step_signsum, run,
                     volume_step, volume_threshold)
from .energy import energy, mm_objective, movement, verify_minimizer
