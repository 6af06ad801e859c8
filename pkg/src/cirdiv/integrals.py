"""Hitting and occupation functionals of the CIR process relative to a barrier.

With ``k = 2b/delta^2``, ``m = 2a/delta^2`` and the scale density
``w(y) = y^(-k) e^(-m y)``, everything reduces to one special function,

    U(x) = e^x x^(k-1) Gamma(1-k, x),   so that   int_r^inf w = r^(1-k) e^(-m r) U(m r),

plus three smooth one-dimensional integrals:

* ``psi1(r) = (2/delta^2) int_r^{r*} e^(-m y) K(y) dy`` with
  ``K(y) = int_0^1 t^(k-1) e^((m-1) y t) dt`` (a Gauss-Jacobi integral);
* ``G(r) = int_{r*}^r U(m z) dz``;
* ``P(r) = int_r^inf U(m y)^2 y^(1-k) e^(-m y) dy``.

The double integral for ``phi2`` collapses by Fubini and one integration by
parts to ``phi2 = (2/delta^2) [G phi1 + (P - phi1 P(r*)) / W*]`` where
``W* = int_{r*}^inf w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sps

from .params import CirParams, DomainError, RegimeError
from .quadrature import exp_sinh, integrate, jacobi_unit_rule, select_level, tanh_sinh
from .special import scaled_upper_gamma

__all__ = [
    "Functionals",
    "weight_density",
    "weight_integral",
    "h_ratio",
    "generator_residual",
]

DOMAIN_CAP = 100.0


def _U(params: CirParams, x):
    return scaled_upper_gamma(1.0 - params.k, x)


def weight_density(params: CirParams, y):
    """``y^(-2b/delta^2) e^(-2a y/delta^2)``."""
    y = np.asarray(y, dtype=float)
    return np.exp(-params.k * np.log(y) - params.m * y)


def _tail(params: CirParams, r):
    """``int_r^inf w(y) dy`` for ``r >= 0`` (``r = 0`` only when it converges)."""
    r = np.asarray(r, dtype=float)
    k, m = params.k, params.m
    out = np.empty(r.shape)
    pos = r > 0
    if np.any(pos):
        rp = r[pos]
        out[pos] = np.exp((1.0 - k) * np.log(rp) - m * rp) * _U(params, m * rp)
    if np.any(~pos):
        if k >= 1.0:
            raise DomainError("int_0^inf y^(-2b/delta^2) e^(-2a y/delta^2) dy diverges when 2b >= delta^2")
        out[~pos] = sps.gamma(1.0 - k) * m ** (k - 1.0)
    return out[()] if out.ndim == 0 else out


def weight_integral(params: CirParams, lo: float, hi: float = math.inf, quad_tol: float = 1e-12) -> float:
    """``int_lo^hi y^(-2b/delta^2) e^(-2a y/delta^2) dy`` by incomplete-gamma reduction.

    ``lo = 0`` is allowed only when ``2b < delta^2``. When the difference of
    the two tails would cancel more than two digits the interval is integrated
    directly instead.
    """
    if lo < 0 or hi < lo:
        raise DomainError("need 0 <= lo <= hi")
    if lo == 0 and not params.zero_attainable:
        raise DomainError("weight integral from 0 diverges when 2b >= delta^2")
    if hi == lo:
        return 0.0
    t_lo = float(_tail(params, lo))
    if math.isinf(hi):
        return t_lo
    t_hi = float(_tail(params, hi))
    diff = t_lo - t_hi
    if diff > 0.01 * t_lo:
        return diff
    val, _ = integrate(lambda y: weight_density(params, y), lo, hi, rtol=quad_tol)
    return float(val)


def h_ratio(params: CirParams, r):
    """``phi1'(r)/phi1(r) = -w(r) / int_r^inf w``; independent of the barrier."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("h_ratio needs r > 0")
    out = -1.0 / (r * _U(params, params.m * r))
    return out[()] if np.ndim(out) == 0 else out


def generator_residual(params: CirParams, g, r: float, h: float = 1e-4, source=0.0) -> float:
    """``(a r + b) g' + (delta^2 r/2) g'' + source`` with central differences of ``g``."""
    g0, gp, gm = g(r), g(r + h), g(r - h)
    d1 = (gp - gm) / (2.0 * h)
    d2 = (gp - 2.0 * g0 + gm) / (h * h)
    src = source(r) if callable(source) else source
    return float((params.a * r + params.b) * d1 + 0.5 * params.delta2 * r * d2 + src)


@dataclass(frozen=True)
class Functionals:
    """``psi1``, ``phi1`` and ``phi2`` for a fixed barrier ``rstar``.

    ``rstar = 0`` gives the zero-barrier variants and needs ``2b < delta^2``.
    Quadrature levels are fixed at construction so every method is a smooth
    function of ``r``.
    """

    params: CirParams
    rstar: float
    quad_tol: float = 1e-12
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.rstar >= 0 and math.isfinite(self.rstar)):
            raise DomainError("rstar must be a finite nonnegative level")
        if self.rstar == 0 and not self.params.zero_attainable:
            raise RegimeError(
                "rstar = 0 needs 2b < delta^2; otherwise phi1 is the indicator of {0} and phi2 vanishes"
            )
        if not (0 < self.quad_tol <= 1e-4):
            raise DomainError("quad_tol must lie in (0, 1e-4]")
        p = self.params
        c = self._cache
        c["W*"] = float(_tail(p, self.rstar))
        tol = self.quad_tol / 10.0
        c["jac"] = self._select_jacobi(tol)
        far = self.rstar + DOMAIN_CAP
        c["lv_fin"] = max(
            select_level(lambda lv: tanh_sinh(lambda z: _U(p, p.m * z), self.rstar, far, lv), tol),
            select_level(lambda lv: tanh_sinh(lambda y: self._psi1_integrand(y), 0.0, max(self.rstar, 1e-3), lv), tol),
        )
        c["lv_inf"] = select_level(lambda lv: exp_sinh(self._p_integrand, self.rstar, 1.0 / p.m, lv), tol)
        c["P*"] = float(self._P(self.rstar))

    # -- building blocks -------------------------------------------------

    def _select_jacobi(self, tol: float) -> int:
        y = max(self.rstar, 1e-3)
        n = 16
        prev = self._K(y, n)
        while n < 1024:
            n *= 2
            cur = self._K(y, n)
            if abs(cur - prev) <= tol * abs(cur):
                return n
            prev = cur
        return n

    def _K(self, y, n=None, power_shift=0.0):
        """``int_0^1 t^(k-1+power_shift) e^((m-1) y t) dt``."""
        n = n or self._cache["jac"]
        t, w = jacobi_unit_rule(n, self.params.k - 1.0 + power_shift)
        y = np.asarray(y, dtype=float)
        return np.sum(w * np.exp((self.params.m - 1.0) * y[..., None] * t), axis=-1)

    def _psi1_integrand(self, y):
        return np.exp(-self.params.m * y) * self._K(y)

    def _p_integrand(self, y):
        p = self.params
        return _U(p, p.m * y) ** 2 * np.exp((1.0 - p.k) * np.log(y) - p.m * y)

    def _G(self, r):
        p = self.params
        r = np.asarray(r, dtype=float)
        return tanh_sinh(lambda z: _U(p, p.m * z), np.full(r.shape, self.rstar), r, self._cache["lv_fin"])

    def _P(self, r):
        return exp_sinh(self._p_integrand, r, 1.0 / self.params.m, self._cache["lv_inf"])

    # unchecked evaluators: defined on (0, inf) by analytic continuation of each formula

    def _phi1(self, r):
        return _tail(self.params, r) / self._cache["W*"]

    def _phi1_prime(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return -weight_density(self.params, r) / self._cache["W*"]

    def _phi1_second(self, r):
        r = np.asarray(r, dtype=float)
        return self._phi1_prime(r) * (-self.params.m - self.params.k / r)

    def _phi2(self, r):
        c = self._cache
        ph = self._phi1(r)
        return 2.0 / self.params.delta2 * (self._G(r) * ph + (self._P(r) - ph * c["P*"]) / c["W*"])

    def _phi2_prime(self, r):
        c = self._cache
        return 2.0 / self.params.delta2 * self._phi1_prime(r) * (self._G(r) - c["P*"] / c["W*"])

    def _phi2_second(self, r):
        p, c = self.params, self._cache
        r = np.asarray(r, dtype=float)
        return 2.0 / p.delta2 * (
            self._phi1_second(r) * (self._G(r) - c["P*"] / c["W*"]) + self._phi1_prime(r) * _U(p, p.m * r)
        )

    def _psi1(self, r):
        r = np.asarray(r, dtype=float)
        return 2.0 / self.params.delta2 * tanh_sinh(
            self._psi1_integrand, r, np.full(r.shape, self.rstar), self._cache["lv_fin"]
        )

    def _psi1_prime(self, r):
        r = np.asarray(r, dtype=float)
        return -2.0 / self.params.delta2 * np.exp(-self.params.m * r) * self._K(r)

    def _psi1_second(self, r):
        p = self.params
        r = np.asarray(r, dtype=float)
        dK = (p.m - 1.0) * self._K(r, power_shift=1.0)
        return 2.0 / p.delta2 * np.exp(-p.m * r) * (p.m * self._K(r) - dK)

    # -- public, domain-checked ------------------------------------------

    @property
    def W_star(self) -> float:
        """``int_{rstar}^inf y^(-2b/delta^2) e^(-2a y/delta^2) dy``."""
        return self._cache["W*"]

    @property
    def P_star(self) -> float:
        return self._cache["P*"]

    def _below(self, r, what):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.rstar):
            raise DomainError(f"{what} is defined on [0, rstar] = [0, {self.rstar:g}]")
        return r

    def _above(self, r, what):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.rstar) or (self.rstar == 0 and np.any(r <= 0)):
            raise DomainError(f"{what} is defined for r >= rstar = {self.rstar:g}")
        return r

    @staticmethod
    def _out(x):
        x = np.asarray(x)
        return x[()] if x.ndim == 0 else x

    def psi1(self, r):
        """``E_r[int_0^tau e^(-r_s) ds]``, tau the first time at the barrier, for ``0 <= r <= rstar``."""
        return self._out(self._psi1(self._below(r, "psi1")))

    def psi1_prime(self, r):
        return self._out(self._psi1_prime(self._below(r, "psi1'")))

    def psi1_second(self, r):
        return self._out(self._psi1_second(self._below(r, "psi1''")))

    def phi1(self, r):
        """``P_r[barrier reached]`` for ``r >= rstar``."""
        return self._out(self._phi1(self._above(r, "phi1")))

    def phi1_prime(self, r):
        """``phi1'``; ``-inf`` marks the pole at ``r = 0`` of the zero-barrier variant."""
        r = np.asarray(r, dtype=float)
        if np.any(r < self.rstar):
            raise DomainError(f"phi1' is defined for r >= rstar = {self.rstar:g}")
        return self._out(self._phi1_prime(r))

    def phi1_second(self, r):
        return self._out(self._phi1_second(self._above(r, "phi1''")))

    def phi2(self, r):
        """``E_r[rho 1{rho < inf}]``, rho the first time at the barrier, for ``r >= rstar``."""
        r = np.asarray(r, dtype=float)
        if np.any(r < self.rstar):
            raise DomainError(f"phi2 is defined for r >= rstar = {self.rstar:g}")
        out = np.zeros(r.shape)
        pos = r > 0
        if np.any(pos):
            out[pos] = self._phi2(r[pos])
        return self._out(out)

    def phi2_prime(self, r):
        return self._out(self._phi2_prime(self._above(r, "phi2'")))

    def phi2_second(self, r):
        return self._out(self._phi2_second(self._above(r, "phi2''")))

    def ode_residuals(self, r: float, h: float = 1e-4) -> tuple[float, float, float]:
        """Generator residuals of ``psi1``, ``phi1`` and ``phi2`` at ``r``.

        Each function is evaluated through its own formula on both sides of
        the stencil (analytic continuation across the barrier), so ``r`` may
        sit anywhere in ``(h, inf)``. A function whose formula is undefined at
        ``r`` (``psi1`` for the zero barrier) yields ``nan``.
        """
        if r <= h:
            raise DomainError("ode_residuals needs r > h")
        p = self.params
        res_psi = math.nan
        if self.rstar > 0:
            res_psi = generator_residual(p, lambda x: float(self._psi1(x)), r, h, source=math.exp(-r))
        res_phi1 = generator_residual(p, lambda x: float(self._phi1(x)), r, h)
        res_phi2 = generator_residual(p, lambda x: float(self._phi2(x)), r, h, source=float(self._phi1(r)))
        return res_psi, res_phi1, res_phi2
