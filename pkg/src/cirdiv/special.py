"""Special functions used by the closed-form CIR functionals.

Two primitives live here:

* the scaled upper incomplete gamma function ``e^x x^(-s) Gamma(s, x)`` for any
  real order ``s`` (scipy only covers ``s > 0``), and
* ``log I_q(z)``, the logarithm of the modified Bessel function of the first
  kind, which the CIR transition density needs for small time steps where the
  plain product overflows.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sps

__all__ = ["upper_gamma", "scaled_upper_gamma", "log_bessel_i"]

_EULER_GAMMA = 0.5772156649015329
_CF_MAX_ITER = 2000
_CF_EPS = 1e-16
_TINY = 1e-300


def _gamma1p_m1_over_s(s: float) -> float:
    """(Gamma(1+s) - 1)/s, accurate through s = 0."""
    if s == 0.0:
        return -_EULER_GAMMA
    if abs(s) >= 0.5:
        return (sps.gamma(1.0 + s) - 1.0) / s
    # log Gamma(1+s) = -gamma*s + sum_{n>=2} (-1)^n zeta(n) s^n / n
    lg = -_EULER_GAMMA * s
    term_pow = s
    for n in range(2, 80):
        term_pow *= s
        term = (-1) ** n * sps.zeta(n) * term_pow / n
        lg += term
        if abs(term) < 1e-18 * abs(lg):
            break
    return math.expm1(lg) / s


def _upper_gamma_series(s: float, x: np.ndarray) -> np.ndarray:
    """Gamma(s, x) for -1 < s < 1.5 and small x, smooth across s = 0."""
    logx = np.log(x)
    if s == 0.0:
        head = -_EULER_GAMMA - logx
    else:
        head = _gamma1p_m1_over_s(s) - np.expm1(s * logx) / s
    # sum_{n>=1} (-x)^n / (n! (s+n))
    acc = np.zeros_like(x)
    term = np.ones_like(x)
    for n in range(1, 60):
        term = term * (-x) / n
        acc = acc + term / (s + n)
        if np.all(np.abs(term) < 1e-18):
            break
    return head - np.exp(s * logx) * acc


def _scaled_cf(s: float, x: np.ndarray) -> np.ndarray:
    """Legendre continued fraction for e^x x^(-s) Gamma(s, x), modified Lentz."""
    b = x + 1.0 - s
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _CF_MAX_ITER):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _CF_EPS
        if not active.any():
            break
    return h


def scaled_upper_gamma(s: float, x) -> np.ndarray:
    """Return ``e^x x^(-s) Gamma(s, x)`` for real ``s`` and ``x > 0``.

    The scaling removes the exponential decay so the value stays O(1/x) for
    large ``x``. Regions: continued fraction for ``x >= max(1, s + 1)``, a
    series that is continuous through ``s = 0`` for ``-1 < s < 1.5``, scipy's
    regularized function for larger ``s``, and a scaled upward recurrence
    for ``s <= -1``.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x <= 0):
        raise ValueError("scaled_upper_gamma requires x > 0")
    out = np.empty_like(x)
    cf = x >= max(1.0, s + 1.0)
    if cf.any():
        out[cf] = _scaled_cf(s, x[cf])
    small = ~cf
    if small.any():
        xs = x[small]
        if s <= -1.0:
            out[small] = _scaled_recurrence(s, xs)
        else:
            out[small] = np.exp(xs - s * np.log(xs)) * _upper_gamma_small(s, xs)
    return out[0] if scalar else out


def _scaled_recurrence(s: float, x: np.ndarray) -> np.ndarray:
    """``e^x x^(-s) Gamma(s, x)`` for ``s <= -1`` and ``x < 1``.

    With ``g_s = e^x x^(-s) Gamma(s, x)`` the recurrence reads
    ``g_s = (x g_(s+1) - 1) / s``; it stays O(1) where the unscaled ``x^s``
    overflows, and errors shrink by ``x/|s|`` per step.
    """
    n = int(math.floor(-s))
    s0 = s + n
    if s0 <= -1.0 + 1e-12:
        s0 += 1.0
        n -= 1
    g = np.exp(x - s0 * np.log(x)) * _upper_gamma_series(s0, x)
    cur = s0
    for _ in range(n):
        cur -= 1.0
        g = (x * g - 1.0) / cur
    return g


def _upper_gamma_small(s: float, x: np.ndarray) -> np.ndarray:
    """``Gamma(s, x)`` for ``s > -1`` below the continued-fraction region."""
    if s < 1.5:
        return _upper_gamma_series(s, x)
    return sps.gamma(s) * sps.gammaincc(s, x)


def upper_gamma(s: float, x) -> np.ndarray:
    """Unregularized upper incomplete gamma ``Gamma(s, x)`` for real ``s``, ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return np.exp(s * np.log(x) - x) * scaled_upper_gamma(s, x)


def log_bessel_i(q: float, z) -> np.ndarray:
    """Logarithm of the modified Bessel function ``I_q(z)`` for ``z > 0``.

    Uses the exponentially scaled ``ive`` so large arguments never overflow;
    where ``ive`` under- or overflows (tiny ``z``) the ascending series is
    summed in log space instead. Orders ``q > -1`` only, which is all the CIR
    density needs.
    """
    if q <= -1.0:
        raise ValueError("log_bessel_i supports q > -1")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        scaled = sps.ive(q, z)
        out = np.log(scaled) + z
    bad = ~np.isfinite(out) | (scaled <= 0.0)
    if bad.any():
        out[bad] = _log_bessel_i_series(q, z[bad])
    return out[0] if scalar else out


def _log_bessel_i_series(q: float, z: np.ndarray) -> np.ndarray:
    # I_q(z) = (z/2)^q / Gamma(q+1) * sum_m (z^2/4)^m / (m! (q+1)_m)
    lead = q * np.log(0.5 * z) - sps.gammaln(q + 1.0)
    y = 0.25 * z * z
    acc = np.ones_like(z)
    term = np.ones_like(z)
    for m in range(1, 400):
        term = term * y / (m * (q + m))
        acc = acc + term
        if np.all(term < 1e-17 * acc):
            break
    return lead + np.log(acc)
