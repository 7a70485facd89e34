"""The regularized single layer and its FMM acceleration.

A constant force density on a sphere of radius ``a`` produces the uniform
velocity ``2 a c / (3 mu)``; the script checks this, then compares the FMM
summation with direct summation for a quadratic density on an ellipsoid.

Run with ``python demos/single_layer.py``.
"""
import time

import numpy as np

from capsim import Grid, OversetCalculus, SingleLayer
from capsim.fmm import FMMSummation
from capsim.reference import quadratic_field, relative_error
from capsim.shapes import Ellipsoid, Sphere, initial_shape

a, mu = 1.5, 2.0
c = np.array([0.3, -1.0, 0.7])
for m in (8, 16, 32):
    grid = Grid(m)
    X, _ = initial_shape(Sphere(a), grid)
    geom = OversetCalculus(grid).geometry(X)
    u = SingleLayer(grid)(X, np.broadcast_to(c, X.shape), geom.W, mu=mu)
    err = np.abs(u - 2 * a * c / (3 * mu)).max()
    print(f"sphere m={m:2d}: max deviation from rigid translation {err:.2e}")

grid = Grid(32)
X, _ = initial_shape(Ellipsoid(0.6, 1.0, 1.0), grid)
geom = OversetCalculus(grid).geometry(X)
f = quadratic_field(X)
t0 = time.perf_counter()
direct = SingleLayer(grid)(X, f, geom.W)
t1 = time.perf_counter()
fast = SingleLayer(grid, summation=FMMSummation(k=100, n_eq=96))(X, f, geom.W)
t2 = time.perf_counter()
print(f"ellipsoid m=32: FMM relative error {relative_error(fast, direct):.2e}, "
      f"direct {t1 - t0:.2f} s, FMM {t2 - t1:.2f} s")
