import numpy as np

from capsim.kernels import NEAR_RATIO, configure_threads, plain_stokeslet_sum, stokeslet_sum
from capsim.quadrature import regularized_stokeslet


def _direct(targets, delta, sources, dens):
    out = np.zeros_like(targets)
    for t in range(len(targets)):
        out[t] = regularized_stokeslet(targets[t], sources, dens, delta[t]).sum(axis=0)
    return out


def test_matches_dense_evaluation(rng):
    src = rng.normal(size=(700, 3))
    dens = rng.normal(size=(700, 3))
    tgt = np.vstack([src[:40], rng.normal(size=(20, 3))])
    delta = rng.uniform(0.05, 0.3, len(tgt))
    ref = _direct(tgt, delta, src, dens)
    np.testing.assert_allclose(stokeslet_sum(tgt, delta, src, dens), ref, rtol=1e-10, atol=1e-12)


def test_plain_sum_skips_coincident_points(rng):
    src = rng.normal(size=(50, 3))
    dens = rng.normal(size=(50, 3))
    u = plain_stokeslet_sum(src[:1], src, dens)
    d = src[0] - src[1:]
    r = np.linalg.norm(d, axis=1)[:, None]
    ref = (dens[1:] / r + np.sum(dens[1:] * d, axis=1)[:, None] * d / r**3).sum(axis=0) / (8 * np.pi)
    np.testing.assert_allclose(u[0], ref, rtol=1e-12)


def test_split_radius_is_safe():
    from capsim.kernels import smoothing_factors_scalar

    s1, s2 = smoothing_factors_scalar(NEAR_RATIO)
    assert abs(s1 - 1) < 1e-11 and abs(s2 - 1) < 1e-11


def test_thread_count_does_not_change_results(rng):
    import numba

    src = rng.normal(size=(1100, 3))
    dens = rng.normal(size=(1100, 3))
    before = stokeslet_sum(src, 0.1, src, dens)
    configure_threads(1)
    try:
        after = stokeslet_sum(src, 0.1, src, dens)
    finally:
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
    np.testing.assert_array_equal(before, after)
