"""Optimal consumption under exponential CIR discounting: analytics and Monte-Carlo checks."""

import os as _os

import numba as _numba

if "NUMBA_THREADING_LAYER" not in _os.environ:
    # the bundled TBB is too old for numba and only produces a warning
    _numba.config.THREADING_LAYER = "omp"

from .params import CirDivError, CirParams, DomainError, NumericalError, Regime, RegimeError
from .cir import CirPath, laplace_M, sample_transition, simulate_path, transition_density, transition_mean
from .integrals import Functionals, h_ratio, weight_integral
from .barrier import BarrierSolution, rstar_sweep, smooth_fit_constant, solve_barrier, solve_rstar
from .value import HjbReport, ValueFunction, value_H, zero_barrier_value
from .mc import (
    McConfig,
    McEstimate,
    Strategy,
    estimate_value,
    hitting_stats,
    last_exit_expectation,
    last_exit_extrapolated,
    simulate_last_exit,
)
from .brownian import BrownianModel, barrier_varrho, hjb_check_brownian, mc_dividends, value_brownian

__version__ = "0.1.0"
