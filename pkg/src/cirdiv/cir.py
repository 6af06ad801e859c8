"""The discounting CIR process: Laplace functional, transition law and sampling."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from . import rng as _rng
from .params import CirParams, DomainError
from .special import log_bessel_i

__all__ = [
    "CirPath",
    "beta",
    "laplace_M",
    "transition_density",
    "transition_mean",
    "sample_transition",
    "simulate_path",
    "simulate_terminal",
    "euler_step",
]


@dataclass(frozen=True)
class CirPath:
    """A realization of the CIR process on a uniform grid."""

    times: np.ndarray
    values: np.ndarray
    seed: int
    path_index: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "r"])
        for t, r in zip(self.times, self.values):
            w.writerow([f"{t:.17g}", f"{r:.17g}"])
        return buf.getvalue()


def beta(params: CirParams, t):
    """``1 / (delta^2/2a + (1 - delta^2/2a) e^(-a t))``."""
    ratio = params.delta2 / (2.0 * params.a)
    return 1.0 / (ratio + (1.0 - ratio) * np.exp(-params.a * np.asarray(t, dtype=float)))


def laplace_M(params: CirParams, r, t):
    """``M(r, t) = E_r[exp(-r_t)]`` in closed form.

    Vectorized over ``r`` and ``t``. Both must be nonnegative.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(r < 0) or np.any(t < 0):
        raise DomainError("laplace_M needs r >= 0 and t >= 0")
    k = params.k
    bt = beta(params, t)
    out = np.exp(-params.a * k * t + k * np.log(bt) - r * bt)
    return out[()] if out.ndim == 0 else out


def transition_mean(params: CirParams, r: float, t: float) -> float:
    """``E_r[r_t] = r e^(a t) + (b/a)(e^(a t) - 1)``."""
    g = math.expm1(params.a * t)
    return r * (1.0 + g) + params.b / params.a * g


def _c(params: CirParams, t):
    return 2.0 * params.a / (np.expm1(params.a * t) * params.delta2)


def transition_density(params: CirParams, r: float, t: float, y):
    """Density of ``r_t`` at ``y`` given ``r_0 = r``, evaluated in log space.

    ``c e^(-u-v) (v/u)^(q/2) I_q(2 sqrt(u v))`` with ``c = c(t)``,
    ``u = c r e^(a t)``, ``v = c y``.
    """
    if r <= 0 or t <= 0:
        raise DomainError("transition_density needs r > 0 and t > 0")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("transition_density needs y > 0")
    c = _c(params, t)
    u = c * r * math.exp(params.a * t)
    v = c * y
    q = params.q
    logf = math.log(c) - u - v + 0.5 * q * (np.log(v) - math.log(u)) + log_bessel_i(q, 2.0 * np.sqrt(u * v))
    out = np.exp(logf)
    return out[()] if np.ndim(out) == 0 else out


def sample_transition(params: CirParams, r: float, t: float, rng, size=None):
    """Exact draw(s) of ``r_t`` given ``r_0 = r``.

    ``2 c(t) r_t`` is noncentral chi-square with ``4b/delta^2`` degrees of
    freedom and noncentrality ``2 c(t) r e^(a t)``; drawn here as a Poisson
    mixture of gammas. ``rng`` is a ``numpy.random.Generator`` or an int seed.
    """
    if r < 0 or t <= 0:
        raise DomainError("sample_transition needs r >= 0 and t > 0")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    c = float(_c(params, t))
    nonc = 2.0 * c * r * math.exp(params.a * t)
    dof = 4.0 * params.b / params.delta2
    n = gen.poisson(0.5 * nonc, size=size)
    x = 2.0 * gen.standard_gamma(0.5 * dof + n, size=size)
    return x / (2.0 * c)


@nb.njit(cache=True, inline="always")
def euler_step(r, a, b, delta, dt, sqdt, z):
    """Full-truncation Euler step; ``r`` may be negative, only its positive part drives."""
    rp = r if r > 0.0 else 0.0
    return r + (a * rp + b) * dt + delta * math.sqrt(rp) * sqdt * z


@nb.njit(cache=True)
def _euler_paths(a, b, delta, r0, dt, n_steps, seed, first, n_paths, keep_grid):
    sqdt = math.sqrt(dt)
    width = n_steps + 1 if keep_grid else 1
    out = np.empty((n_paths, width))
    for p in range(n_paths):
        s = _rng.new_stream(seed, first + p, 0)
        r = r0
        if keep_grid:
            out[p, 0] = r0
        for i in range(n_steps):
            r = euler_step(r, a, b, delta, dt, sqdt, _rng.next_normal(s))
            if keep_grid:
                out[p, i + 1] = r if r > 0.0 else 0.0
        if not keep_grid:
            out[p, 0] = r if r > 0.0 else 0.0
    return out


def _check_grid(r0: float, horizon: float, dt: float) -> int:
    if r0 < 0 or dt <= 0 or horizon < dt:
        raise DomainError("need r0 >= 0, dt > 0 and horizon >= dt")
    n = int(round(horizon / dt))
    if abs(n * dt - horizon) > 1e-9 * horizon:
        raise DomainError("horizon must be an integer multiple of dt")
    return n


def simulate_path(params: CirParams, r0: float, horizon: float, dt: float, seed: int, path_index: int = 0) -> CirPath:
    """Full-truncation Euler path on ``[0, horizon]`` from the stream ``(seed, path_index)``.

    Reported levels are the positive part of the scheme state.
    """
    n = _check_grid(r0, horizon, dt)
    vals = _euler_paths(params.a, params.b, params.delta, float(r0), dt, n, seed, path_index, 1, True)[0]
    times = dt * np.arange(n + 1)
    return CirPath(times=times, values=vals, seed=seed, path_index=path_index)


def simulate_terminal(params: CirParams, r0: float, horizon: float, dt: float, n_paths: int, seed: int) -> np.ndarray:
    """Terminal levels of ``n_paths`` Euler paths (paths ``0..n_paths-1`` of ``seed``)."""
    n = _check_grid(r0, horizon, dt)
    return _euler_paths(params.a, params.b, params.delta, float(r0), dt, n, seed, 0, n_paths, False)[:, 0]
