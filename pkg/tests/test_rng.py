import numba as nb
import numpy as np
import pytest
from scipy import stats

from cirdiv import rng


@nb.njit
def _draw(kind, seed, n, p1, p2):
    s = rng.new_stream(seed, 0, 0)
    out = np.empty(n)
    for i in range(n):
        if kind == 0:
            out[i] = rng.next_gamma(s, p1)
        elif kind == 1:
            out[i] = rng.next_poisson(s, p1)
        else:
            out[i] = rng.next_ncx2(s, p1, p2)
    return out


@nb.njit
def _lane_normals(seed, path, n):
    S = np.empty((4, 4), np.uint64)
    rng.seed_lane(S, 2, seed, path, 0)
    out = np.empty(n)
    for j in range(n):
        u, i = rng.lane_zig(S, 2)
        out[j] = u * rng.ZIG_X[i] if abs(u) < rng.ZIG_RATIO[i] else rng.lane_finish(S, 2, u, i)
    return out


def test_streams_reproducible_and_distinct():
    a = rng.uniforms(7, 3, 1000)
    assert np.array_equal(a, rng.uniforms(7, 3, 1000))
    assert not np.array_equal(a, rng.uniforms(7, 4, 1000))
    assert not np.array_equal(a, rng.uniforms(8, 3, 1000))
    assert np.all((a > 0) & (a < 1))


def test_lane_draws_equal_scalar_stream():
    assert np.array_equal(_lane_normals(11, 5, 5000), rng.normals(11, 5, 5000))


@pytest.mark.parametrize("seed", [0, 1, 12345])
def test_normals_ks(seed):
    z = rng.normals(seed, 0, 200_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(np.mean(z)) < 5 / np.sqrt(z.size)
    tail = np.mean(np.abs(z) > 3.5)  # exercises the ziggurat tail sampler
    assert tail == pytest.approx(2 * stats.norm.sf(3.5), rel=0.25)


def test_uniform_ks():
    assert stats.kstest(rng.uniforms(3, 0, 200_000), "uniform").pvalue > 1e-3


@pytest.mark.parametrize("shape", [0.05, 0.5, 1.0, 4.4])
def test_gamma_ks(shape):
    assert stats.kstest(_draw(0, 5, 50_000, shape, 0.0), "gamma", args=(shape,)).pvalue > 1e-3


@pytest.mark.parametrize("lam", [0.3, 4.0, 60.0])
def test_poisson_moments(lam):
    x = _draw(1, 9, 100_000, lam, 0.0)
    assert np.all(x == np.round(x))
    assert np.mean(x) == pytest.approx(lam, abs=5 * np.sqrt(lam / x.size))
    assert np.var(x) == pytest.approx(lam, rel=0.05)


@pytest.mark.parametrize("dof,nonc", [(0.98, 0.5), (1.6, 12.0), (4.0, 300.0)])
def test_ncx2_ks(dof, nonc):
    x = _draw(2, 13, 50_000, dof, nonc)
    assert stats.kstest(x, "ncx2", args=(dof, nonc)).pvalue > 1e-3
