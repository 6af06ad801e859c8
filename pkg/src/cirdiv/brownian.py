"""Dividend barrier for a Brownian surplus discounted by a CIR rate with ``delta^2 = 2a``.

The surplus is ``X_t = x + mu t + sigma B_t`` and the CIR noise is independent
of ``B``. Under ``delta^2 = 2a`` one has ``E_r[e^(-r_t)] = e^(-r - b t)``, so the
problem reduces to the classical one with constant rate ``b``: reflect the
surplus at

    varrho = (ln(b - mu zeta) - ln(b - mu theta)) / (theta - zeta),

where ``theta > 0 > zeta`` are the roots of ``(sigma^2/2) s^2 + mu s - b = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numba as nb
import numpy as np

from . import rng as _rng
from .mc import LANES, McConfig, McEstimate, _summarize, set_threads
from .params import CirParams, DomainError, NumericalError
from .rng import ZIG_RATIO, ZIG_X
from .value import HjbReport

__all__ = [
    "BrownianModel",
    "characteristic_roots",
    "barrier_varrho",
    "value_brownian",
    "value_brownian_derivatives",
    "hjb_check_brownian",
    "mc_dividends",
]


def characteristic_roots(mu: float, sigma: float, b: float) -> tuple[float, float]:
    """``(theta, zeta)``, the positive and negative roots of ``(sigma^2/2) s^2 + mu s - b``."""
    if not (mu > 0 and sigma > 0 and b > 0):
        raise DomainError("mu, sigma and b must be positive")
    s2 = sigma * sigma
    if s2 == 0.0:
        raise NumericalError("sigma^2 underflows; the characteristic roots cannot be evaluated")
    s = math.sqrt(mu * mu + 2.0 * s2 * b)
    theta = 2.0 * b / (mu + s)  # (-mu + s) / sigma^2 without the cancellation
    zeta = -(mu + s) / s2
    if not (theta > 0 and math.isfinite(zeta)):
        raise NumericalError("the characteristic roots are not representable for these parameters")
    return theta, zeta


def barrier_varrho(mu: float, sigma: float, b: float) -> float:
    """Optimal dividend barrier ``varrho``."""
    theta, zeta = characteristic_roots(mu, sigma, b)
    s = math.sqrt(mu * mu + 2.0 * sigma * sigma * b)
    # b - mu theta = 2 b^2 sigma^2 / (mu + s)^2, positive but tiny when sigma -> 0
    gap = 2.0 * b * b * sigma * sigma / ((mu + s) * (mu + s))
    if not (gap > 0 and math.isfinite(gap)):
        raise NumericalError("b - mu theta underflowed; the barrier formula cannot be evaluated")
    rho = (math.log(b - mu * zeta) - math.log(gap)) / (theta - zeta)
    if not (rho > 0 and math.isfinite(rho)):
        raise NumericalError(f"barrier evaluated to {rho!r}")
    return rho


@dataclass(frozen=True)
class BrownianModel:
    """Surplus drift ``mu`` and volatility ``sigma``; CIR rate with ``a = delta^2 / 2``.

    Only ``delta`` is taken for the rate, so the constraint ``delta^2 = 2a``
    cannot be violated.
    """

    mu: float
    sigma: float
    b: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "b", "delta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite")

    @property
    def a(self) -> float:
        return 0.5 * self.delta * self.delta

    @cached_property
    def cir(self) -> CirParams:
        return CirParams(self.a, self.b, self.delta)

    @cached_property
    def theta(self) -> float:
        return characteristic_roots(self.mu, self.sigma, self.b)[0]

    @cached_property
    def zeta(self) -> float:
        return characteristic_roots(self.mu, self.sigma, self.b)[1]

    @cached_property
    def varrho(self) -> float:
        return barrier_varrho(self.mu, self.sigma, self.b)

    @cached_property
    def _denominator(self) -> float:
        th, ze, rho = self.theta, self.zeta, self.varrho
        return th * math.exp(th * rho) - ze * math.exp(ze * rho)

    def as_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "b": self.b, "delta": self.delta, "a": self.a,
                "theta": self.theta, "zeta": self.zeta, "varrho": self.varrho}


def value_brownian_derivatives(model: BrownianModel, r: float, x: float) -> tuple[float, float, float]:
    """``(V, V_x, V_xx)`` in closed form; ``V_r = -V`` and ``V_rr = V``."""
    if r < 0 or x < 0:
        raise DomainError("value_brownian needs r, x >= 0")
    disc = math.exp(-r)
    rho = model.varrho
    if x >= rho:
        return disc * (x - rho + model.mu / model.b), disc, 0.0
    th, ze, den = model.theta, model.zeta, model._denominator
    et, ez = math.exp(th * x), math.exp(ze * x)
    return (
        disc * (et - ez) / den,
        disc * (th * et - ze * ez) / den,
        disc * (th * th * et - ze * ze * ez) / den,
    )


def value_brownian(model: BrownianModel, r: float, x: float) -> float:
    """Value of the barrier strategy at ``varrho``: linear above the barrier, exponential below."""
    return value_brownian_derivatives(model, r, x)[0]


def hjb_check_brownian(model: BrownianModel, r: float, x: float) -> HjbReport:
    """Both parts of ``max{mu V_x + (sigma^2/2) V_xx + (ar+b) V_r + a r V_rr, e^(-r) - V_x}``."""
    if not (r > 0 and x > 0):
        raise DomainError("hjb_check_brownian needs r > 0 and x > 0")
    v, vx, vxx = value_brownian_derivatives(model, r, x)
    a = model.a
    gen = model.mu * vx + 0.5 * model.sigma**2 * vxx + (a * r + model.b) * (-v) + a * r * v
    grad = math.exp(-r) - vx
    return HjbReport(r, x, gen, grad, HjbReport.active(gen, grad))


# -- Monte-Carlo --------------------------------------------------------------


@nb.njit(cache=True)
def _dividend_block(mu, sigma, a, b, delta, barrier, r0, x0, dt, n_steps, seed, first, count, const_rate, out):
    S = np.empty((2 * LANES, 4), np.uint64)
    r = np.zeros(LANES)
    X = np.zeros(LANES)
    acc = np.zeros(LANES)
    step = np.zeros(LANES, np.int64)
    pid = np.full(LANES, -1, np.int64)
    vol = delta * math.sqrt(dt)
    sig = sigma * math.sqrt(dt)
    mu_dt = mu * dt
    nxt = first
    end = first + count
    live = 0
    for w in range(LANES):
        if nxt < end:
            pid[w] = nxt
            nxt += 1
            live += 1
    for w in range(LANES):
        step[w] = -1  # marks a lane that still has to be initialised
    while live > 0:
        for w in range(LANES):
            p = pid[w]
            if p < 0:
                continue
            n = step[w]
            status = -1
            if n < 0:
                _rng.seed_lane(S, w, seed, p, 0)
                _rng.seed_lane(S, LANES + w, seed, p, 1)
                r[w] = r0
                X[w] = x0
                acc[w] = 0.0
                step[w] = 0
                if x0 <= 0.0:
                    status = 1
                elif x0 > barrier:
                    acc[w] = (x0 - barrier) * math.exp(-r0)
                    X[w] = barrier
            elif n >= n_steps:
                status = 0
            else:
                if const_rate:
                    disc = r0 + b * (n + 1) * dt
                    r[w] = disc
                else:
                    u, i = _rng.lane_zig(S, w)
                    z = u * ZIG_X[i] if abs(u) < ZIG_RATIO[i] else _rng.lane_finish(S, w, u, i)
                    rp = r[w] if r[w] > 0.0 else 0.0
                    r[w] = r[w] + (a * rp + b) * dt + vol * math.sqrt(rp) * z
                    disc = r[w] if r[w] > 0.0 else 0.0
                u, i = _rng.lane_zig(S, LANES + w)
                z = u * ZIG_X[i] if abs(u) < ZIG_RATIO[i] else _rng.lane_finish(S, LANES + w, u, i)
                x = X[w] + mu_dt + sig * z
                step[w] = n + 1
                if x <= 0.0:
                    X[w] = 0.0
                    status = 1
                elif x > barrier:
                    acc[w] += (x - barrier) * math.exp(-disc)
                    X[w] = barrier
                else:
                    X[w] = x
            if status >= 0:
                out[p, 0] = acc[w]
                out[p, 1] = r[w] if r[w] > 0.0 else 0.0
                out[p, 2] = X[w]
                out[p, 3] = status
                if nxt < end:
                    pid[w] = nxt
                    step[w] = -1
                    nxt += 1
                else:
                    pid[w] = -1
                    live -= 1


@nb.njit(cache=True, parallel=True)
def _dividends(mu, sigma, a, b, delta, barrier, r0, x0, dt, n_steps, seed, n_paths, const_rate):
    out = np.empty((n_paths, 4))
    block = 256
    n_blocks = (n_paths + block - 1) // block
    for j in nb.prange(n_blocks):
        first = j * block
        _dividend_block(mu, sigma, a, b, delta, barrier, r0, x0, dt, n_steps, seed, first,
                        min(block, n_paths - first), const_rate, out)
    return out


def mc_dividends(model: BrownianModel, r0: float, x0: float, cfg: McConfig, barrier: float | None = None,
                 constant_rate: bool = False) -> McEstimate:
    """Discounted dividends of the strategy that reflects the surplus at ``barrier`` (default ``varrho``).

    Each Euler step of the free surplus is checked for ruin first; any excess
    over the barrier is then paid out and discounted by ``e^(-r)`` at the end
    of the step. Surplus and rate use separate streams of the path. With
    ``constant_rate`` the discount is ``e^(-r0 - b t)`` instead, the classical
    model the problem reduces to. ``tail_bound`` averages the optimal value at
    the horizon state of surviving paths.
    """
    if not (r0 >= 0 and x0 >= 0):
        raise DomainError("mc_dividends needs r0 >= 0 and x0 >= 0")
    level = model.varrho if barrier is None else float(barrier)
    if not level > 0:
        raise DomainError("the dividend barrier must be positive")
    cfg.validate()
    if cfg.antithetic:
        raise DomainError("antithetic sampling is not offered for the dividend simulation")
    set_threads(cfg.threads)
    out = _dividends(model.mu, model.sigma, model.a, model.b, model.delta, level, float(r0), float(x0),
                     float(cfg.dt), cfg.n_steps, np.uint64(int(cfg.seed)), int(cfg.n_paths), bool(constant_rate))
    alive = out[:, 3] == 0
    tail = sum(value_brownian(model, float(rt), float(xt)) for rt, xt in zip(out[alive, 1], out[alive, 2]))
    return _summarize(out[:, 0], cfg, tail_bound=float(tail) / cfg.n_paths, n_unfinished=int(np.sum(alive)))
