"""Optimal waiting barrier r* and the smooth-fit constant in the high-volatility regime."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .integrals import Functionals, h_ratio
from .params import CirParams, NumericalError, Regime, RegimeError

__all__ = ["BarrierSolution", "solve_rstar", "smooth_fit_constant", "solve_barrier", "rstar_sweep"]

MAX_ITER = 200
XTOL = 1e-12


@dataclass(frozen=True)
class BarrierSolution:
    rstar: float
    tildeF: float | None
    bracket: tuple[float, float]
    iterations: int
    residual: float
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "rstar": self.rstar,
            "tildeF": self.tildeF,
            "bracket": list(self.bracket),
            "iterations": self.iterations,
            "residual": self.residual,
            "degenerate": self.degenerate,
        }


def _objective(params: CirParams):
    return lambda r: float(h_ratio(params, r)) + 1.0


def solve_rstar(params: CirParams) -> BarrierSolution:
    """Unique root of ``h(r) + 1 = 0`` in ``(0, R]`` by Brent's method.

    The lower bracket end starts at ``min(1e-8, R/1e6)`` and is shrunk by
    10x up to five times if ``h + 1`` is not yet negative there. A root
    pinned against that end is flagged ``degenerate`` rather than reported as
    a clean positive barrier.
    """
    if params.regime is not Regime.HIGH_VOL:
        raise RegimeError(
            "no finite barrier when delta^2 <= 2a: maximal spending is optimal "
            "(low-volatility regime, use the H value function)"
        )
    R = params.R
    f = _objective(params)
    lo = min(1e-8, R / 1e6)
    f_lo = f(lo)
    shrinks = 0
    while f_lo >= 0 and shrinks < 5:
        lo /= 10.0
        f_lo = f(lo)
        shrinks += 1
    f_hi = f(R)
    if not (f_lo < 0 < f_hi or f_hi == 0):
        raise NumericalError(f"h + 1 does not change sign on [{lo:g}, {R:g}]: values {f_lo:g}, {f_hi:g}")
    if f_hi == 0:
        return BarrierSolution(R, None, (lo, R), 0, 0.0)
    # the x-tolerance also scales with lo: near a tiny root h is steep (~ -k/r)
    xtol = min(XTOL, 4 * np.finfo(float).eps * lo)
    root, info = optimize.brentq(f, lo, R, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=MAX_ITER, full_output=True)
    if not info.converged:
        raise NumericalError(f"Brent iteration did not converge: {info.flag}")
    width = max(xtol, 4 * np.finfo(float).eps * abs(root))
    bracket = (float(max(lo, root - width)), float(min(R, root + width)))
    degenerate = root <= 10.0 * lo
    return BarrierSolution(root, None, bracket, info.iterations, abs(f(root)), degenerate)


def smooth_fit_constant(params: CirParams, mu: float, sol: BarrierSolution, functionals: Functionals | None = None) -> float:
    """``mu phi2'(r*) e^(-r*) - mu psi1'(r*)``, the value at the barrier with no wealth."""
    fn = functionals or Functionals(params, sol.rstar)
    r = sol.rstar
    return float(mu * fn.phi2_prime(r) * math.exp(-r) - mu * fn.psi1_prime(r))


def solve_barrier(params: CirParams, mu: float) -> tuple[BarrierSolution, Functionals]:
    """Barrier, smooth-fit constant and the functionals built on that barrier."""
    sol = solve_rstar(params)
    fn = Functionals(params, sol.rstar)
    return replace(sol, tildeF=smooth_fit_constant(params, mu, sol, fn)), fn


def rstar_sweep(a: float, b: float, deltas) -> np.ndarray:
    """``r*`` for each volatility in ``deltas`` (all must be in the high-volatility regime)."""
    return np.array([solve_rstar(CirParams(a, b, float(d))).rstar for d in deltas])
