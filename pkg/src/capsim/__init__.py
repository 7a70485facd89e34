"""Boundary-integral simulation of an elastic capsule in Stokes flow.

The capsule surface is covered by six overlapping hemispherical patches,
derivatives come from overset finite differences blended with a partition
of unity, and the Stokes single layer is evaluated with a regularized
kernel on a spline-upsampled grid.
"""
import os

import numba

# prefer OpenMP so that an outdated TBB install is never probed
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .atlas import Grid, build_grids  # noqa: E402
from .dynamics import CapsuleModel, FlowSpec, background_velocity, rkf45_advance, simulate  # noqa: E402
from .membrane import MembraneParams  # noqa: E402
from .quadrature import SingleLayer  # noqa: E402
from .shapes import Ellipsoid, FourBump, Sphere, initial_shape  # noqa: E402
from .surfderiv import OversetCalculus  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "CapsuleModel", "Ellipsoid", "FlowSpec", "FourBump", "Grid", "MembraneParams", "OversetCalculus",
    "SingleLayer", "Sphere", "background_velocity", "build_grids", "initial_shape", "rkf45_advance",
    "simulate",
]
