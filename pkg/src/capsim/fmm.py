"""Single-level kernel-independent FMM for the regularized single layer.

Sources are grouped by k-means.  Each cluster's far field is represented by
plain Stokeslets at ``N_eq`` equivalent points on a cube around it, with
strengths fit to reproduce the members' field on a larger check cube.
Targets close to a cluster see its members directly through the regularized
kernel.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError
from .kernels import NEAR_RATIO, plain_stokeslet_sum, stokeslet_sum

NEIGHBOR_RULES = ("cube", "target")


def kmeans(points, k, seed=0, max_iter=100, tol=1e-6):
    """k-means++ seeding followed by Lloyd iterations.

    Returns ``(labels, centroids)``.  An empty cluster is re-seeded at the
    point farthest from its current centroid.
    """
    points = np.asarray(points, float)
    n = len(points)
    if not 1 <= k <= n:
        raise ConfigurationError(f"k={k} must lie in 1..{n}")
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centroids[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[c]) ** 2, axis=1))
    scale = max(np.ptp(points, axis=0).max(), 1e-300)
    for _ in range(max_iter):
        dist, labels = cKDTree(centroids).query(points)
        counts = np.bincount(labels, minlength=k)
        new = np.stack(
            [np.bincount(labels, weights=points[:, a], minlength=k) for a in range(points.shape[1])],
            axis=1,
        )
        empty = counts == 0
        new[~empty] /= counts[~empty, None]
        for c in np.nonzero(empty)[0]:
            new[c] = points[np.argmax(dist)]
            dist[np.argmax(dist)] = -1.0
        shift = np.abs(new - centroids).max() / scale
        centroids = new
        if shift < tol and not empty.any():
            break
    labels = cKDTree(centroids).query(points)[1]
    return labels, centroids


def cube_surface_points(count):
    """``count`` near-uniform points on the surface of ``[-1, 1]^3``.

    A Fibonacci lattice on the sphere is projected radially onto the cube.
    """
    if count < 26:
        raise ConfigurationError("need at least 26 equivalent points")
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    rho = np.sqrt(1 - z**2)
    ang = np.pi * (1 + 5**0.5) * i
    p = np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=1)
    return p / np.abs(p).max(axis=1, keepdims=True)


def _stokeslet_matrix(x, y):
    """Dense ``(3 len(x), 3 len(y))`` matrix of the plain Stokeslet (no 1/8 pi mu)."""
    d = x[:, None, :] - y[None, :, :]
    r = np.linalg.norm(d, axis=-1)
    K = np.eye(3) / r[..., None, None] + d[..., :, None] * d[..., None, :] / r[..., None, None] ** 3
    return K.transpose(0, 2, 1, 3).reshape(3 * len(x), 3 * len(y))


@dataclass
class Cluster:
    members: np.ndarray
    center: np.ndarray
    half: float
    equivalent: np.ndarray = field(default=None, repr=False)
    check: np.ndarray = field(default=None, repr=False)
    densities: np.ndarray = field(default=None, repr=False)
    residual: float = 0.0


class FMMSummation:
    """Drop-in replacement for direct summation in :class:`SingleLayer`.

    Parameters
    ----------
    k
        Number of clusters.
    n_eq
        Equivalent points per cluster.
    neighbor_rule
        ``"cube"``: clusters interact directly when their bounding cubes,
        grown by ``expand`` of the edge, intersect.  ``"target"``: a target
        sees a cluster directly when it lies inside that cluster's check cube.
    eq_ratio, check_ratio
        Cube scalings of the equivalent and check surfaces.
    check_factor
        Check points per equivalent point; above 1 the fit is least squares.
    """

    def __init__(self, k=100, n_eq=96, seed=0, neighbor_rule="target", eq_ratio=1.05,
                 check_ratio=2.5, expand=0.15, rcond=1e-12, check_factor=4):
        problems = []
        if int(k) != k or k < 1:
            problems.append("fmm.k must be a positive integer")
        if int(n_eq) != n_eq or n_eq < 26:
            problems.append("fmm.n_eq must be an integer >= 26")
        if neighbor_rule not in NEIGHBOR_RULES:
            problems.append(f"fmm neighbor rule must be one of {NEIGHBOR_RULES}")
        if int(check_factor) != check_factor or check_factor < 1:
            problems.append("fmm check_factor must be a positive integer")
        if not 1 <= eq_ratio < check_ratio:
            problems.append("need 1 <= eq_ratio < check_ratio")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)
        self.k, self.n_eq, self.seed = int(k), int(n_eq), seed
        self.neighbor_rule = neighbor_rule
        self.eq_ratio, self.check_ratio, self.expand = eq_ratio, check_ratio, expand
        unit = cube_surface_points(self.n_eq)
        self._eq_unit = eq_ratio * unit
        self._check_unit = check_ratio * cube_surface_points(int(check_factor) * self.n_eq)
        self._fit_unit = _stokeslet_matrix(self._check_unit, self._eq_unit)
        U, s, Vt = np.linalg.svd(self._fit_unit, full_matrices=False)
        keep = s > rcond * s[0]
        # K is homogeneous of degree -1, so a cube of half-width h uses h * pinv
        self._pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T
        self.stats = {}

    def build(self, sources, densities):
        """Cluster the sources and fit equivalent densities."""
        sources = np.asarray(sources, float)
        densities = np.asarray(densities, float)
        k = min(self.k, len(sources))
        labels, _ = kmeans(sources, k, self.seed)
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(k + 1))
        clusters = []
        worst = 0.0
        for c in range(k):
            members = order[bounds[c] : bounds[c + 1]]
            pts = sources[members]
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            center = 0.5 * (lo + hi)
            half = max(0.5 * (hi - lo).max(), 1e-12)
            cl = Cluster(members, center, half)
            cl.equivalent = center + half * self._eq_unit
            cl.check = center + half * self._check_unit
            u_check = plain_stokeslet_sum(cl.check, pts, densities[members], mu=1 / (8 * np.pi))
            q = half * (self._pinv @ u_check.ravel())
            fit = self._fit_unit @ q / half
            norm = np.abs(u_check).max()
            cl.residual = float(np.abs(fit - u_check.ravel()).max() / norm) if norm > 0 else 0.0
            worst = max(worst, cl.residual)
            cl.densities = q.reshape(-1, 3)
            clusters.append(cl)
        if worst > 1e-1:
            warnings.warn(f"equivalent-density fit residual {worst:.2e}", RuntimeWarning, stacklevel=2)
        self.stats["max_residual"] = worst
        return clusters

    def _near_mask(self, clusters, targets, delta):
        """Boolean ``(k, T)``: which targets see which clusters directly."""
        k = len(clusters)
        centers = np.array([c.center for c in clusters])
        halves = np.array([c.half for c in clusters])
        if self.neighbor_rule == "cube":
            own = cKDTree(centers).query(targets)[1]
            grown = halves * (1 + self.expand)
            gap = np.abs(centers[:, None, :] - centers[None, :, :]).max(axis=-1)
            adjacent = gap <= grown[:, None] + grown[None, :]
            near = adjacent[:, own]
        else:
            rel = np.abs(targets[None, :, :] - centers[:, None, :]).max(axis=-1)
            near = rel <= (self.check_ratio * halves)[:, None]
        # any pair inside the regularization range must be evaluated directly
        reach = NEAR_RATIO * delta
        for c in range(k):
            far = np.nonzero(~near[c])[0]
            if far.size == 0:
                continue
            tree = cKDTree(np.asarray(self._sources[clusters[c].members]))
            dist = tree.query(targets[far], distance_upper_bound=reach.max() * (1 + 1e-12))[0]
            near[c, far[dist <= reach[far]]] = True
        return near

    def __call__(self, targets, delta, sources, densities, mu=1.0):
        targets = np.asarray(targets, float)
        delta = np.broadcast_to(np.asarray(delta, float), targets.shape[:1])
        self._sources = np.asarray(sources, float)
        clusters = self.build(sources, densities)
        near = self._near_mask(clusters, targets, delta)
        out = np.zeros_like(targets)
        for c, cl in enumerate(clusters):
            idx = np.nonzero(near[c])[0]
            if idx.size:
                out[idx] += stokeslet_sum(
                    targets[idx], delta[idx], self._sources[cl.members], densities[cl.members], mu
                )
            far = np.nonzero(~near[c])[0]
            if far.size:
                out[far] += plain_stokeslet_sum(targets[far], cl.equivalent, cl.densities, mu)
        self.stats["near_fraction"] = float(near.mean())
        self.clusters = clusters
        return out
