"""Parameters of the discounting CIR process and the error types shared by all modules."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "CirParams",
    "Regime",
    "CirDivError",
    "DomainError",
    "RegimeError",
    "NumericalError",
]


class CirDivError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CirDivError, ValueError):
    """An argument lies outside the domain of the requested function."""


class RegimeError(CirDivError, ValueError):
    """The parameter regime does not admit the requested object."""


class NumericalError(CirDivError, ArithmeticError):
    """A numerical procedure (bracketing, quadrature) failed."""


class Regime(str, Enum):
    LOW_VOL = "LowVol"
    HIGH_VOL = "HighVol"


@dataclass(frozen=True)
class CirParams:
    """Coefficients of ``dr = (a r + b) dt + delta sqrt(r) dW``.

    ``a`` is the (positive, so non-mean-reverting) drift slope, ``b`` the
    drift intercept and ``delta`` the volatility coefficient.
    """

    a: float
    b: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "delta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def delta2(self) -> float:
        return self.delta * self.delta

    @property
    def q(self) -> float:
        """Bessel order ``2b/delta^2 - 1`` of the transition density."""
        return 2.0 * self.b / self.delta2 - 1.0

    @property
    def k(self) -> float:
        """Exponent ``2b/delta^2`` of the scale density ``y^(-k) e^(-m y)``."""
        return 2.0 * self.b / self.delta2

    @property
    def m(self) -> float:
        """Rate ``2a/delta^2`` of the scale density."""
        return 2.0 * self.a / self.delta2

    @property
    def regime(self) -> Regime:
        return Regime.LOW_VOL if self.delta2 <= 2.0 * self.a else Regime.HIGH_VOL

    @property
    def zero_attainable(self) -> bool:
        """True when ``2b < delta^2`` and the process can touch zero."""
        return 2.0 * self.b < self.delta2

    @property
    def R(self) -> float:
        """Upper bound ``b / (delta^2/2 - a)`` on the optimal barrier (high volatility only)."""
        if self.regime is not Regime.HIGH_VOL:
            raise RegimeError("R = b/(delta^2/2 - a) exists only when delta^2 > 2a")
        return self.b / (0.5 * self.delta2 - self.a)

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "delta": self.delta}
