"""Value functions of the deterministic-income consumption problem and their HJB check.

Low volatility (``delta^2 <= 2a``): spending everything at once is optimal and
the value is ``H(r, x) = x e^(-r) + mu int_0^inf M(r, s) ds``.

High volatility: spend while ``r <= r*``, otherwise wait. The value is
``F = x e^(-r) + mu psi1(r) + F~`` below the barrier and
``G = (x e^(-r*) + F~) phi1(r) + mu e^(-r*) phi2(r)`` above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .barrier import BarrierSolution, solve_barrier
from .cir import laplace_M
from .integrals import DOMAIN_CAP, Functionals
from .params import CirParams, DomainError, Regime, RegimeError
from .quadrature import exp_sinh, select_level

__all__ = ["ValueFunction", "HjbReport", "value_H", "zero_barrier_value", "HJB_TOL"]

HJB_TOL = 1e-4


@lru_cache(maxsize=64)
def _h_level(params: CirParams) -> int:
    rate = 2.0 * params.a * params.b / params.delta2
    return select_level(lambda lv: exp_sinh(lambda s: laplace_M(params, 0.0, s), 0.0, 1.0 / rate, lv), 1e-14)


def _occupation(params: CirParams, r):
    """``int_0^inf M(r, s) ds``, vectorized over ``r``."""
    rate = 2.0 * params.a * params.b / params.delta2
    r = np.asarray(r, dtype=float)
    out = exp_sinh(lambda s: laplace_M(params, r[..., None], s), np.zeros(r.shape), 1.0 / rate, _h_level(params))
    return out[()] if out.ndim == 0 else out


def value_H(params: CirParams, mu: float, r: float, x: float, strict: bool = True) -> float:
    """Value of spending everything at once: ``x e^(-r) + mu int_0^inf M(r, s) ds``.

    With ``strict`` (the default) this refuses the high-volatility regime,
    where ``H`` is only the value of a suboptimal strategy.
    """
    if strict and params.regime is Regime.HIGH_VOL:
        raise RegimeError("H is not the value function when delta^2 > 2a (it fails the HJB equation for r > R)")
    if r < 0 or x < 0:
        raise DomainError("value_H needs r, x >= 0")
    return x * math.exp(-r) + mu * float(_occupation(params, r))


@dataclass(frozen=True)
class HjbReport:
    r: float
    x: float
    generator_part: float
    gradient_part: float
    active_branch: str

    @staticmethod
    def active(generator_part: float, gradient_part: float) -> str:
        """The branch attaining the maximum; an exactly satisfied spending condition wins ties."""
        return "spend" if gradient_part == 0.0 or gradient_part >= generator_part else "wait"

    @property
    def hjb_max(self) -> float:
        return max(self.generator_part, self.gradient_part)

    def ok(self, tol: float = HJB_TOL) -> bool:
        return self.hjb_max <= tol and abs(self.hjb_max) <= tol


@dataclass(frozen=True)
class ValueFunction:
    """Optimal value ``V(r, x)`` of the deterministic-income problem."""

    params: CirParams
    mu: float
    regime: Regime
    barrier: BarrierSolution | None = None
    functionals: Functionals | None = None

    @classmethod
    def build(cls, params: CirParams, mu: float) -> "ValueFunction":
        if not (mu >= 0 and math.isfinite(mu)):
            raise DomainError("mu must be a finite nonnegative income rate")
        if params.regime is Regime.LOW_VOL:
            return cls(params, mu, Regime.LOW_VOL)
        sol, fn = solve_barrier(params, mu)
        return cls(params, mu, Regime.HIGH_VOL, sol, fn)

    @property
    def rstar(self) -> float:
        return math.inf if self.barrier is None else self.barrier.rstar

    @property
    def tildeF(self) -> float:
        if self.barrier is None:
            raise RegimeError("no smooth-fit constant in the low-volatility regime")
        return self.barrier.tildeF

    def _need_high(self, what: str) -> None:
        if self.regime is not Regime.HIGH_VOL:
            raise RegimeError(f"{what} exists only in the high-volatility regime delta^2 > 2a")

    # raw piece formulas, valid on a neighbourhood of the barrier as well

    def _F(self, r: float, x: float) -> float:
        return x * math.exp(-r) + self.mu * float(self.functionals._psi1(r)) + self.tildeF

    def _G(self, r: float, x: float) -> float:
        fn, rs = self.functionals, self.rstar
        ph = float(fn._phi1(r))
        return (x * math.exp(-rs) + self.tildeF) * ph + self.mu * math.exp(-rs) * float(fn._phi2(r))

    def _H(self, r: float, x: float) -> float:
        return value_H(self.params, self.mu, r, x, strict=False)

    def value_F(self, r: float, x: float) -> float:
        self._need_high("F")
        if not (0 <= r <= self.rstar) or x < 0:
            raise DomainError(f"F is defined on [0, r*] x [0, inf) with r* = {self.rstar:g}")
        return self._F(r, x)

    def value_G(self, r: float, x: float) -> float:
        self._need_high("G")
        if r < self.rstar or x < 0:
            raise DomainError(f"G is defined on [r*, inf) x [0, inf) with r* = {self.rstar:g}")
        return self._G(r, x)

    def branch(self, r: float) -> str:
        """Which piece ``evaluate`` uses at ``r``: ``H``, ``F``, ``G`` or ``cap``."""
        if self.regime is Regime.LOW_VOL:
            return "H"
        if r <= self.rstar:
            return "F"
        return "cap" if r > self.rstar + DOMAIN_CAP else "G"

    def evaluate(self, r: float, x: float) -> float:
        """``V(r, x)``; zero beyond ``r* + 100`` where every term is below machine precision."""
        if r < 0 or x < 0:
            raise DomainError("V is defined for r, x >= 0")
        piece = self.branch(r)
        if piece == "H":
            return self._H(r, x)
        if piece == "F":
            return self._F(r, x)
        if piece == "G":
            return self._G(r, x)
        return 0.0

    def evaluate_array(self, r, x) -> np.ndarray:
        """Vectorized ``evaluate`` for arrays of states (no domain checks)."""
        r, x = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(x, dtype=float))
        r, x = r.ravel(), x.ravel()
        out = np.zeros(r.shape)
        for lo in range(0, r.size, 2048):
            sl = slice(lo, lo + 2048)
            out[sl] = self._evaluate_chunk(r[sl], x[sl])
        return out

    def _evaluate_chunk(self, r: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self.regime is Regime.LOW_VOL:
            return x * np.exp(-r) + self.mu * _occupation(self.params, r)
        out = np.zeros(r.shape)
        fn, rs = self.functionals, self.rstar
        lo = r <= rs
        if np.any(lo):
            out[lo] = x[lo] * np.exp(-r[lo]) + self.mu * fn._psi1(r[lo]) + self.tildeF
        hi = (r > rs) & (r <= rs + DOMAIN_CAP)
        if np.any(hi):
            ph = fn._phi1(r[hi])
            out[hi] = (x[hi] * math.exp(-rs) + self.tildeF) * ph + self.mu * math.exp(-rs) * fn._phi2(r[hi])
        return out

    def slope_x(self, r: float) -> float:
        """``V_x(r, .)``; the value is linear in ``x``."""
        if self.regime is Regime.LOW_VOL or r <= self.rstar:
            return math.exp(-r)
        return float(self.functionals._phi1(r)) * math.exp(-self.rstar)

    def _piece(self, r: float):
        piece = self.branch(r)
        return {"H": self._H, "F": self._F, "G": self._G}.get(piece)

    def r_derivatives(self, r: float, x: float, h: float | None = None) -> tuple[float, float]:
        """``(V_r, V_rr)`` by finite differences on the piece that contains ``r``.

        The stencil never mixes pieces: the formula of the active piece is
        continued across the barrier. Below ``h`` one-sided stencils are used.
        """
        f = self._piece(r)
        if f is None:
            return 0.0, 0.0
        h = h or 1e-4 * max(1.0, r)
        if r >= h:
            v0, vp, vm = f(r, x), f(r + h, x), f(r - h, x)
            return (vp - vm) / (2 * h), (vp - 2 * v0 + vm) / (h * h)
        v0, v1, v2, v3 = (f(r + i * h, x) for i in range(4))
        d1 = (-3 * v0 + 4 * v1 - v2) / (2 * h)
        d2 = (2 * v0 - 5 * v1 + 4 * v2 - v3) / (h * h)
        return d1, d2

    def generator(self, r: float, x: float) -> float:
        """``mu V_x + (a r + b) V_r + (delta^2 r / 2) V_rr``."""
        p = self.params
        vr, vrr = self.r_derivatives(r, x)
        return self.mu * self.slope_x(r) + (p.a * r + p.b) * vr + 0.5 * p.delta2 * r * vrr

    def hjb_check(self, r: float, x: float) -> HjbReport:
        if r < 0 or x < 0:
            raise DomainError("hjb_check needs r, x >= 0")
        gen = self.generator(r, x)
        grad = math.exp(-r) - self.slope_x(r)
        return HjbReport(r, x, gen, grad, HjbReport.active(gen, grad))


def zero_barrier_value(params: CirParams, mu: float, r: float, x: float, functionals: Functionals | None = None) -> float:
    """Value of spending only when the rate touches zero: ``(x + mu E_0[lambda_0]) phi1^(r) + mu phi2^(r)``."""
    if not params.zero_attainable or params.regime is not Regime.HIGH_VOL:
        raise RegimeError("the zero-barrier strategy needs 2b < delta^2 and delta^2 > 2a")
    if r < 0 or x < 0:
        raise DomainError("zero_barrier_value needs r, x >= 0")
    from .mc import last_exit_expectation

    fn = functionals or _zero_functionals(params)
    pot = x + mu * last_exit_expectation(params)
    if r == 0:
        return pot
    return pot * float(fn.phi1(r)) + mu * float(fn.phi2(r))


@lru_cache(maxsize=16)
def _zero_functionals(params: CirParams) -> Functionals:
    return Functionals(params, 0.0)
