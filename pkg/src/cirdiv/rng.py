"""Per-path random streams for the Monte-Carlo kernels.

Each path owns an xoshiro256** generator whose state is derived from
``(seed, path_index, driver)`` through splitmix64, so a path's draws do not
depend on how many paths run, in which order, or on how many threads. All
samplers are numba-compiled and take the 4-word state array.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

__all__ = [
    "new_stream",
    "next_uniform",
    "next_normal",
    "next_gamma",
    "next_poisson",
    "next_ncx2",
    "uniforms",
    "normals",
    "seed_lane",
    "lane_uniform",
    "lane_zig",
    "lane_finish",
    "ZIG_X",
    "ZIG_RATIO",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK53 = np.uint64(11)
_U53 = 1.0 / 9007199254740992.0
_U52 = 2.0 * _U53


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def _splitmix(z):
    z = z + _GOLDEN
    x = z
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return z, x ^ (x >> np.uint64(31))


@nb.njit(cache=True)
def new_stream(seed, path, driver):
    """Return a fresh generator state for ``(seed, path, driver)``."""
    z = np.uint64(seed)
    z, h = _splitmix(z)
    z = h ^ (np.uint64(path) * _MIX2)
    z, h = _splitmix(z)
    z = h ^ (np.uint64(driver) * _MIX1)
    state = np.empty(4, dtype=np.uint64)
    for i in range(4):
        z, out = _splitmix(z)
        state[i] = out
    return state


@nb.njit(cache=True, inline="always")
def _next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True, inline="always")
def next_uniform(s):
    """Uniform on the open interval (0, 1)."""
    return (np.int64(_next_u64(s) >> _MASK53) + 0.5) * _U53


def _ziggurat_tables(n=128, r=3.442619855899, v=9.91256303526217e-3):
    f = lambda x: math.exp(-0.5 * x * x)
    x = np.zeros(n + 1)
    x[0] = v / f(r)
    x[1] = r
    for i in range(2, n):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f(x[i - 1])))
    return x, x[1:] / x[:-1]


_ZX, _ZRATIO = _ziggurat_tables()
_ZR = 3.442619855899
_LOW7 = np.uint64(127)
ZIG_X, ZIG_RATIO = _ZX, _ZRATIO


@nb.njit(cache=True)
def _normal_tail(s, i, u):
    """Slow path of the ziggurat: base strip tail or wedge rejection."""
    while True:
        if i == 0:
            while True:
                x = -math.log(next_uniform(s)) / _ZR
                y = -math.log(next_uniform(s))
                if y + y >= x * x:
                    break
            return -(_ZR + x) if u < 0.0 else _ZR + x
        x = u * _ZX[i]
        f0 = math.exp(-0.5 * (_ZX[i] * _ZX[i] - x * x))
        f1 = math.exp(-0.5 * (_ZX[i + 1] * _ZX[i + 1] - x * x))
        if f1 + next_uniform(s) * (f0 - f1) < 1.0:
            return x
        bits = _next_u64(s)
        i = np.int64(bits & _LOW7)
        u = np.int64(bits >> _MASK53) * _U52 - 1.0 + _U53
        if abs(u) < _ZRATIO[i]:
            return u * _ZX[i]


@nb.njit(cache=True, inline="always")
def next_normal(s):
    """Standard normal by a 128-layer ziggurat (one 64-bit draw on the fast path)."""
    bits = _next_u64(s)
    i = np.int64(bits & _LOW7)
    u = np.int64(bits >> _MASK53) * _U52 - 1.0 + _U53
    if abs(u) < _ZRATIO[i]:
        return u * _ZX[i]
    return _normal_tail(s, i, u)


@nb.njit(cache=True)
def next_gamma(s, shape):
    """Gamma(shape, 1) by Marsaglia-Tsang, boosted for shape < 1."""
    if shape <= 0.0:
        return 0.0
    boost = 1.0
    if shape < 1.0:
        boost = next_uniform(s) ** (1.0 / shape)
        shape += 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = next_normal(s)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = next_uniform(s)
        if u < 1.0 - 0.0331 * x * x * x * x:
            return d * v * boost
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v * boost


@nb.njit(cache=True)
def next_poisson(s, lam):
    """Poisson(lam): inversion for small means, PTRS rejection otherwise."""
    if lam <= 0.0:
        return 0
    if lam < 10.0:
        k = 0
        p = math.exp(-lam)
        cdf = p
        u = next_uniform(s)
        while u > cdf:
            k += 1
            p *= lam / k
            cdf += p
            if p < 1e-300 and k > lam:
                break
        return k
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = next_uniform(s) - 0.5
        v = next_uniform(s)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)) <= (
            -lam + k * loglam - math.lgamma(k + 1.0)
        ):
            return int(k)


@nb.njit(cache=True)
def next_ncx2(s, dof, nonc):
    """Noncentral chi-square as a Poisson(nonc/2) mixture of central chi-squares."""
    n = next_poisson(s, 0.5 * nonc)
    return 2.0 * next_gamma(s, 0.5 * dof + n)


# Lane variants: row ``w`` of a ``(lanes, 4)`` state matrix is one stream. The
# kernels advance a few paths in lockstep so their independent dependency
# chains overlap in the CPU pipeline. A normal on lane w is drawn as
#     u, i = lane_zig(S, w)
#     z = u * ZIG_X[i] if abs(u) < ZIG_RATIO[i] else lane_finish(S, w, u, i)


@nb.njit(cache=True)
def seed_lane(S, w, seed, path, driver):
    S[w, :] = new_stream(seed, path, driver)


@nb.njit(cache=True, inline="always")
def _lane_u64(S, w):
    s0 = S[w, 0]
    s1 = S[w, 1]
    s2 = S[w, 2]
    s3 = S[w, 3]
    result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    S[w, 0] = s0
    S[w, 1] = s1
    S[w, 2] = s2
    S[w, 3] = _rotl(s3, 45)
    return result


@nb.njit(cache=True, inline="always")
def lane_uniform(S, w):
    return (np.int64(_lane_u64(S, w) >> _MASK53) + 0.5) * _U53


@nb.njit(cache=True, inline="always")
def lane_zig(S, w):
    """One ziggurat draw ``(u, layer)`` on lane ``w``.

    The caller finishes the normal with ``lane_finish``; keeping the rare
    slow-path call in the caller is what lets numba inline this hot part.
    """
    bits = _lane_u64(S, w)
    return np.int64(bits >> _MASK53) * _U52 - 1.0 + _U53, np.int64(bits & _LOW7)


@nb.njit(cache=True)
def lane_finish(S, w, u, i):
    """Complete a ziggurat draw whose fast-path test failed."""
    if abs(u) < _ZRATIO[i]:
        return u * _ZX[i]
    return _normal_tail(S[w], i, u)


@nb.njit(cache=True)
def uniforms(seed, path, n):
    """``n`` uniforms from the stream of ``(seed, path)``; used by the tests."""
    s = new_stream(seed, path, 0)
    out = np.empty(n)
    for i in range(n):
        out[i] = next_uniform(s)
    return out


@nb.njit(cache=True)
def normals(seed, path, n):
    s = new_stream(seed, path, 0)
    out = np.empty(n)
    for i in range(n):
        out[i] = next_normal(s)
    return out
