"""Monte-Carlo estimation of consumption strategies and path functionals.

All estimators share one path kernel. Paths follow full-truncation Euler on
the ``dt`` grid wherever something can happen on the next few steps; far
above the relevant level (where neither a payment nor a hit can occur before
the process moves ``Z_SAFE`` standard deviations) the kernel jumps ahead by
an exact noncentral chi-square transition of a whole number of grid steps.
That leaves the law of the grid path unchanged apart from crossings with
probability ~1e-12 per jump, and removes almost all work spent on paths that
have drifted away.

Every path draws from its own stream ``(seed, path_index)``, so results do
not depend on thread count or scheduling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numba as nb
import numpy as np

from . import rng as _rng
from .integrals import DOMAIN_CAP, Functionals, _tail
from .params import CirParams, DomainError, Regime, RegimeError
from .quadrature import exp_sinh, select_level
from .rng import ZIG_RATIO, ZIG_X

__all__ = [
    "Strategy",
    "StrategyKind",
    "McConfig",
    "McEstimate",
    "estimate_value",
    "hitting_stats",
    "occupation_until_exit",
    "last_exit_expectation",
    "last_exit_normalizer",
    "simulate_last_exit",
    "last_exit_extrapolated",
    "simulate_strategy_paths",
    "difference_se",
    "set_threads",
]

MODE_PAY, MODE_HIT, MODE_EXIT, MODE_LAST = 0, 1, 2, 3
STATUS_HORIZON, STATUS_EVENT, STATUS_KILLED = 0, 1, 2
LANES = 4
BLOCK = 256
Z_SAFE = 7.0
MIN_JUMP = 2
KILL_OFFSET = DOMAIN_CAP
JUMP_TIME_SCALE = 0.25  # longest exact jump, in units of 1/a


def set_threads(n: int | None) -> int:
    """Set the numba worker count (capped at what numba was started with)."""
    if n is not None:
        if n < 1:
            raise DomainError("threads must be >= 1")
        nb.set_num_threads(min(int(n), nb.config.NUMBA_NUM_THREADS))
    return nb.get_num_threads()


# -- strategies and configuration ---------------------------------------------


class StrategyKind(str, Enum):
    MAX_SPEND = "max"
    BARRIER = "barrier"
    ZERO = "zero"


@dataclass(frozen=True)
class Strategy:
    """Spend everything accumulated whenever the rate is at or below a level.

    ``MaxSpend`` uses no level (always spend), ``BarrierR(level)`` spends iff
    ``r <= level`` and ``ZeroBarrier`` spends iff ``r`` is at zero, read on the
    grid as ``r <= eps_hit``.
    """

    kind: StrategyKind
    level: float | None = None
    eps_hit: float | None = None

    def __post_init__(self) -> None:
        if self.kind is StrategyKind.BARRIER and not (self.level is not None and 0 <= self.level < math.inf):
            raise DomainError("a barrier strategy needs a finite level >= 0")
        if self.eps_hit is not None and not self.eps_hit > 0:
            raise DomainError("eps_hit must be positive")

    @classmethod
    def max_spend(cls) -> "Strategy":
        return cls(StrategyKind.MAX_SPEND)

    @classmethod
    def barrier(cls, level: float) -> "Strategy":
        return cls(StrategyKind.BARRIER, float(level))

    @classmethod
    def zero(cls, eps_hit: float | None = None) -> "Strategy":
        return cls(StrategyKind.ZERO, eps_hit=eps_hit)

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """``max``, ``zero`` or ``barrier:LEVEL``."""
        head, _, arg = text.partition(":")
        if head == "max" and not arg:
            return cls.max_spend()
        if head == "zero" and not arg:
            return cls.zero()
        if head == "barrier" and arg:
            try:
                return cls.barrier(float(arg))
            except ValueError:
                pass
        raise DomainError(f"unknown strategy {text!r}; expected max, zero or barrier:LEVEL")

    def describe(self) -> str:
        if self.kind is StrategyKind.BARRIER:
            return f"barrier:{self.level!r}"
        return self.kind.value

    def spend_level(self, params: CirParams) -> float:
        """The level ``L`` such that the strategy spends at grid points with ``r <= L``."""
        if self.kind is StrategyKind.MAX_SPEND:
            return math.inf
        if self.kind is StrategyKind.BARRIER:
            return self.level
        if not params.zero_attainable:
            raise RegimeError(
                "the zero-barrier strategy needs 2b < delta^2 (otherwise the rate never reaches zero)"
            )
        if self.eps_hit is not None:
            return self.eps_hit
        return default_eps_hit(params)


def default_eps_hit(params: CirParams) -> float:
    """``1e-4 r*`` in the high-volatility regime, ``1e-6`` otherwise."""
    if params.regime is Regime.HIGH_VOL:
        from .barrier import solve_rstar

        return 1e-4 * solve_rstar(params).rstar
    return 1e-6


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 10_000
    dt: float = 1e-2
    horizon: float = 1000.0
    seed: int = 0
    antithetic: bool = False
    threads: int | None = None

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def validate(self) -> None:
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 2):
            raise DomainError("n_paths must be an integer >= 2")
        if self.antithetic and self.n_paths % 2:
            raise DomainError("antithetic sampling needs an even number of paths")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be positive")
        if not (self.horizon > self.dt and math.isfinite(self.horizon)):
            raise DomainError("configuration error: dt must be smaller than the horizon")
        if abs(self.n_steps * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise DomainError("horizon must be an integer multiple of dt")
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error and the settings that produced it.

    ``tail_bound`` bounds what the truncation at ``horizon`` can have cut off
    (per path, averaged); the horizon is adequate when it is below a tenth of
    the standard error.
    """

    mean: float
    std_error: float
    n_paths: int
    dt: float
    horizon: float
    seed: int
    tail_bound: float = math.nan
    n_killed: int = 0
    n_unfinished: int = 0
    antithetic: bool = False
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def tail_ok(self) -> bool:
        return bool(self.tail_bound <= self.std_error / 10.0)

    def within(self, target: float, n_se: float = 3.0, allowance: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_se * self.std_error + allowance

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("samples")
        return d


def _summarize(samples: np.ndarray, cfg: McConfig, **extra) -> McEstimate:
    samples = np.ascontiguousarray(samples, dtype=float)
    units = 0.5 * (samples[0::2] + samples[1::2]) if cfg.antithetic else samples
    mean = float(np.mean(units))
    se = float(np.std(units, ddof=1) / math.sqrt(units.size))
    return McEstimate(
        mean=mean,
        std_error=se,
        n_paths=int(cfg.n_paths),
        dt=float(cfg.dt),
        horizon=float(cfg.horizon),
        seed=int(cfg.seed),
        antithetic=bool(cfg.antithetic),
        samples=samples,
        **extra,
    )


def difference_se(e1: McEstimate, e2: McEstimate) -> float:
    """Standard error of ``e1.mean - e2.mean``.

    Estimates from the same seed and path count share their random numbers;
    the per-path differences then give the (smaller) correct error. Otherwise
    the two are independent and the errors add in quadrature.
    """
    paired = (
        e1.samples is not None
        and e2.samples is not None
        and e1.seed == e2.seed
        and e1.n_paths == e2.n_paths
        and e1.antithetic == e2.antithetic
    )
    if not paired:
        return math.hypot(e1.std_error, e2.std_error)
    d = e1.samples - e2.samples
    if e1.antithetic:
        d = 0.5 * (d[0::2] + d[1::2])
    return float(np.std(d, ddof=1) / math.sqrt(d.size))


# -- the path kernel ----------------------------------------------------------


@nb.njit(cache=True)
def _exact_jump(S, w, rp, m, a, d2, dt, dof):
    big_t = m * dt
    c = 2.0 * a / (math.expm1(a * big_t) * d2)
    nonc = 2.0 * c * rp * math.exp(a * big_t)
    return _rng.next_ncx2(S[w], dof, nonc) / (2.0 * c)


@nb.njit(cache=True)
def _start_lane(S, w, p, seed, antithetic, r0, x0, r, pot, acc, aux, step, pid, sgn):
    if antithetic:
        _rng.seed_lane(S, w, seed, p // 2, 0)
        sgn[w] = -1.0 if p % 2 else 1.0
    else:
        _rng.seed_lane(S, w, seed, p, 0)
        sgn[w] = 1.0
    r[w] = r0
    pot[w] = x0
    acc[w] = 0.0
    aux[w] = 0.0
    step[w] = 0
    pid[w] = p


@nb.njit(cache=True)
def _block(mode, a, b, delta, level, mu, r0, x0, dt, n_steps, seed, first, count, kill, max_jump, antithetic, out):
    S = np.empty((LANES, 4), np.uint64)
    r = np.zeros(LANES)
    pot = np.zeros(LANES)
    acc = np.zeros(LANES)
    aux = np.zeros(LANES)
    sgn = np.ones(LANES)
    step = np.zeros(LANES, np.int64)
    pid = np.full(LANES, -1, np.int64)
    vol = delta * math.sqrt(dt)
    d2 = delta * delta
    dof = 4.0 * b / d2
    jump_coef = 1.0 / (Z_SAFE * Z_SAFE * d2 * dt)
    mu_dt = mu * dt
    nxt = first
    end = first + count
    live = 0
    for w in range(LANES):
        if nxt < end:
            _start_lane(S, w, nxt, seed, antithetic, r0, x0, r, pot, acc, aux, step, pid, sgn)
            nxt += 1
            live += 1
    while live > 0:
        for w in range(LANES):
            p = pid[w]
            if p < 0:
                continue
            rp = r[w] if r[w] > 0.0 else 0.0
            n = step[w]
            status = -1
            euler = False
            m = 0
            if mode == MODE_PAY:
                if n >= n_steps:
                    status = STATUS_HORIZON
                elif rp > kill:
                    status = STATUS_KILLED
                elif rp <= level:
                    acc[w] += (pot[w] + mu_dt) * math.exp(-rp)
                    pot[w] = 0.0
                    euler = True
                else:
                    gap = rp - level
                    mf = min(gap * gap / rp * jump_coef, max_jump)
                    if mf >= MIN_JUMP:
                        m = min(int(mf), n_steps - n)
                        pot[w] += m * mu_dt
                    else:
                        pot[w] += mu_dt
                        euler = True
            elif mode == MODE_HIT:
                if rp <= level:
                    status = STATUS_EVENT
                    acc[w] = 1.0
                    aux[w] = n * dt
                elif n >= n_steps:
                    status = STATUS_HORIZON
                elif rp > kill:
                    status = STATUS_KILLED
                else:
                    gap = rp - level
                    mf = min(gap * gap / rp * jump_coef, max_jump)
                    if mf >= MIN_JUMP:
                        m = min(int(mf), n_steps - n)
                    else:
                        euler = True
            elif mode == MODE_EXIT:
                if rp > level:
                    status = STATUS_EVENT
                    aux[w] = n * dt
                elif n >= n_steps:
                    status = STATUS_HORIZON
                else:
                    acc[w] += dt * math.exp(-rp)
                    euler = True
            else:  # MODE_LAST
                if rp <= level:
                    acc[w] = n * dt
                    aux[w] = 1.0
                if n >= n_steps:
                    status = STATUS_HORIZON
                elif rp > kill:
                    status = STATUS_KILLED
                elif rp <= level:
                    euler = True
                else:
                    gap = rp - level
                    mf = min(gap * gap / rp * jump_coef, max_jump)
                    if mf >= MIN_JUMP:
                        m = min(int(mf), n_steps - n)
                    else:
                        euler = True

            if euler:
                u, i = _rng.lane_zig(S, w)
                z = u * ZIG_X[i] if abs(u) < ZIG_RATIO[i] else _rng.lane_finish(S, w, u, i)
                r[w] = r[w] + (a * rp + b) * dt + vol * math.sqrt(rp) * sgn[w] * z
                step[w] = n + 1
            elif m > 0:
                r[w] = _exact_jump(S, w, rp, m, a, d2, dt, dof)
                step[w] = n + m
            elif status >= 0:
                out[p, 0] = acc[w]
                out[p, 1] = aux[w]
                out[p, 2] = rp
                out[p, 3] = pot[w]
                out[p, 4] = status
                if nxt < end:
                    _start_lane(S, w, nxt, seed, antithetic, r0, x0, r, pot, acc, aux, step, pid, sgn)
                    nxt += 1
                else:
                    pid[w] = -1
                    live -= 1


@nb.njit(cache=True, parallel=True)
def _run(mode, a, b, delta, level, mu, r0, x0, dt, n_steps, seed, n_paths, kill, max_jump, antithetic):
    out = np.empty((n_paths, 5))
    n_blocks = (n_paths + BLOCK - 1) // BLOCK
    for j in nb.prange(n_blocks):
        first = j * BLOCK
        _block(mode, a, b, delta, level, mu, r0, x0, dt, n_steps, seed, first, min(BLOCK, n_paths - first),
               kill, max_jump, antithetic, out)
    return out


def _simulate(mode: int, params: CirParams, level: float, mu: float, r0: float, x0: float, cfg: McConfig) -> np.ndarray:
    cfg.validate()
    set_threads(cfg.threads)
    kill = (level if math.isfinite(level) else 0.0) + KILL_OFFSET
    max_jump = max(1.0, JUMP_TIME_SCALE / (params.a * cfg.dt))
    return _run(
        mode, params.a, params.b, params.delta, float(level), float(mu), float(r0), float(x0), float(cfg.dt),
        cfg.n_steps, np.uint64(int(cfg.seed)), int(cfg.n_paths), float(kill), float(max_jump), bool(cfg.antithetic),
    )


# -- strategy values ----------------------------------------------------------


def estimate_value(params: CirParams, mu: float, strategy: Strategy, r0: float, x0: float, cfg: McConfig,
                   tail: bool = True) -> McEstimate:
    """Expected discounted consumption ``E[int e^(-r_s) dC_s]`` of ``strategy`` from ``(r0, x0)``.

    Income accrues at rate ``mu``. At every grid time with ``r <= L`` the
    strategy pays the accumulated pot plus the income of the coming step,
    discounted at the step's left endpoint; otherwise the step's income is
    added to the pot. ``tail_bound`` averages the optimal value at the
    horizon state, which bounds every admissible continuation.
    """
    if not (r0 >= 0 and x0 >= 0):
        raise DomainError("need r0 >= 0 and x0 >= 0")
    if not (mu >= 0 and math.isfinite(mu)):
        raise DomainError("mu must be a finite nonnegative income rate")
    level = strategy.spend_level(params)
    out = _simulate(MODE_PAY, params, level, mu, r0, x0, cfg)
    status = out[:, 4]
    unfinished = status == STATUS_HORIZON
    bound = _value_tail(params, mu, out[unfinished, 2], out[unfinished, 3], cfg.n_paths) if tail else math.nan
    return _summarize(out[:, 0], cfg, tail_bound=bound, n_killed=int(np.sum(status == STATUS_KILLED)),
                      n_unfinished=int(np.sum(unfinished)))


def _value_tail(params: CirParams, mu: float, r_end: np.ndarray, pot_end: np.ndarray, n_paths: int) -> float:
    from .value import ValueFunction

    if r_end.size == 0:
        return 0.0
    vf = ValueFunction.build(params, mu)
    return float(np.sum(vf.evaluate_array(r_end, pot_end)) / n_paths)


# -- hitting functionals -------------------------------------------------------


def hitting_stats(params: CirParams, r0: float, target: float, cfg: McConfig) -> tuple[McEstimate, McEstimate]:
    """Estimates of ``P_r0[rho < inf]`` and ``E_r0[rho 1{rho < inf}]`` for the first grid time at or below ``target``.

    The tail bounds are the exact contributions of paths still running at the
    horizon, ``phi1(r_T)`` and ``T phi1(r_T) + phi2(r_T)``.
    """
    if not (r0 >= target >= 0):
        raise DomainError("hitting_stats needs r0 >= target >= 0")
    out = _simulate(MODE_HIT, params, target, 0.0, r0, 0.0, cfg)
    status = out[:, 4]
    unfinished = status == STATUS_HORIZON
    hit = out[:, 0]
    p_tail = t_tail = math.nan
    r_end = out[unfinished, 2]
    try:
        fn = Functionals(params, target)
    except (RegimeError, DomainError):
        fn = None
    if fn is not None:
        near = r_end[r_end <= target + DOMAIN_CAP]
        ph = np.concatenate([fn._phi1(c) for c in _chunks(near)]) if near.size else np.zeros(0)
        p2 = np.concatenate([fn._phi2(c) for c in _chunks(near)]) if near.size else np.zeros(0)
        p_tail = float(np.sum(ph) / cfg.n_paths)
        t_tail = float(np.sum(cfg.horizon * ph + p2) / cfg.n_paths)
    extra = dict(n_killed=int(np.sum(status == STATUS_KILLED)), n_unfinished=int(np.sum(unfinished)))
    return (
        _summarize(hit, cfg, tail_bound=p_tail, **extra),
        _summarize(hit * out[:, 1], cfg, tail_bound=t_tail, **extra),
    )


def occupation_until_exit(params: CirParams, r0: float, level: float, cfg: McConfig) -> McEstimate:
    """Estimate of ``E_r0[int_0^tau e^(-r_s) ds]``, tau the first grid time above ``level``."""
    if not (0 <= r0 <= level):
        raise DomainError("occupation_until_exit needs 0 <= r0 <= level")
    out = _simulate(MODE_EXIT, params, level, 0.0, r0, 0.0, cfg)
    unfinished = out[:, 4] == STATUS_HORIZON
    bound = math.nan
    if level > 0:
        fn = Functionals(params, level)
        r_end = out[unfinished, 2]
        bound = float(np.sum(fn._psi1(np.minimum(r_end, level))) / cfg.n_paths) if r_end.size else 0.0
    return _summarize(out[:, 0], cfg, tail_bound=bound, n_unfinished=int(np.sum(unfinished)))


def _chunks(x: np.ndarray, size: int = 2048):
    return [x[i:i + size] for i in range(0, x.size, size)] or [x]


# -- last exit from zero -------------------------------------------------------


def _check_zero(params: CirParams) -> None:
    if not params.zero_attainable:
        raise RegimeError("the last exit time from zero needs 2b < delta^2 (zero is not reached otherwise)")


def _exit_kernel(params: CirParams, t):
    """``(e^(a t) - 1)^(-2b/delta^2)``, overflow-safe."""
    x = params.a * np.asarray(t, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        log_em1 = np.where(x < 30.0, np.log(np.expm1(np.minimum(x, 30.0))), x + np.log1p(-np.exp(-x)))
    return np.exp(-params.k * log_em1)


def _exit_moment(params: CirParams, power: int, level: int) -> float:
    scale = 1.0 / (params.a * params.k)
    return float(exp_sinh(lambda t: t**power * _exit_kernel(params, t), 0.0, scale, level))


def last_exit_normalizer(params: CirParams, level: int | None = None) -> float:
    """``int_0^inf (e^(a t) - 1)^(-2b/delta^2) dt``."""
    _check_zero(params)
    level = level or _exit_level(params)
    return _exit_moment(params, 0, level)


def _exit_level(params: CirParams) -> int:
    return select_level(lambda lv: np.array([_exit_moment(params, 0, lv), _exit_moment(params, 1, lv)]), 1e-13,
                        max_level=12)


def last_exit_expectation(params: CirParams, level: int | None = None) -> float:
    """``E_0[lambda_0]``: mean of the last time at zero, from its density ``(e^(at)-1)^(-2b/delta^2)`` normalized.

    ``level`` fixes the quadrature rule; by default the smallest level whose
    refinement agrees to 1e-13 is used.
    """
    _check_zero(params)
    level = level or _exit_level(params)
    return _exit_moment(params, 1, level) / _exit_moment(params, 0, level)


def simulate_last_exit(params: CirParams, eps: float, cfg: McConfig) -> McEstimate:
    """Mean of the last grid time at or below ``eps`` on ``[0, horizon]`` for paths started at 0.

    ``tail_bound`` is the average probability of returning to ``eps`` after
    the horizon, ``int_{r_T}^inf w / int_eps^inf w``.
    """
    _check_zero(params)
    if not eps > 0:
        raise DomainError("eps must be positive")
    out = _simulate(MODE_LAST, params, eps, 0.0, 0.0, 0.0, cfg)
    r_end = out[:, 2]
    back = np.where(r_end <= eps, 1.0, _tail(params, np.maximum(r_end, eps)) / float(_tail(params, eps)))
    return _summarize(out[:, 0], cfg, tail_bound=float(np.mean(back)),
                      n_killed=int(np.sum(out[:, 4] == STATUS_KILLED)))


def last_exit_extrapolated(params: CirParams, cfg: McConfig, eps: tuple[float, float] = (1e-2, 1e-3)) -> McEstimate:
    """``E_0[lambda_0]`` from last exits at two levels, extrapolated to level zero.

    The last time at or below ``eps`` exceeds the last time at zero by
    ``c eps^(1 - 2b/delta^2) + o(...)``: with ``W(eps) = int_eps^inf w`` the
    return probability ``W(r)/W(eps)`` differs from ``W(r)/W(0)`` by a factor
    ``1 + eps^(1-k) / ((1-k) W(0)) + ...``. One Richardson step with that
    exponent removes the leading term. Both levels use the same path streams,
    so the error follows from the per-path combination.
    """
    e_coarse, e_fine = (float(e) for e in eps)
    if not 0 < e_fine < e_coarse:
        raise DomainError("eps must be a pair (coarse, fine) with 0 < fine < coarse")
    if cfg.antithetic:
        raise DomainError("antithetic sampling is not offered for the last-exit extrapolation")
    coarse = simulate_last_exit(params, e_coarse, cfg)
    fine = simulate_last_exit(params, e_fine, cfg)
    c = (e_fine / e_coarse) ** (1.0 - params.k)
    combined = (fine.samples - c * coarse.samples) / (1.0 - c)
    return _summarize(combined, cfg, tail_bound=max(coarse.tail_bound, fine.tail_bound),
                      n_killed=min(coarse.n_killed, fine.n_killed))


# -- sample paths for inspection ----------------------------------------------


@nb.njit(cache=True)
def _wealth_paths(r, level, mu, x0, dt):
    n_paths, n = r.shape
    X = np.empty((n_paths, n))
    C = np.empty((n_paths, n))
    for p in range(n_paths):
        x = x0
        c = 0.0
        for i in range(n):
            x += mu * dt
            if r[p, i] <= level:
                c += x
                x = 0.0
            X[p, i] = x
            C[p, i] = c
    return X, C


def simulate_strategy_paths(params: CirParams, mu: float, strategy: Strategy, r0: float, x0: float, dt: float,
                            horizon: float, seed: int, n_paths: int = 3) -> list[tuple[int, float, float, float, float]]:
    """Rows ``(path_id, t, r, X, C)`` of pure-Euler sample paths under ``strategy``.

    ``X`` is the unspent wealth after the action at ``t`` and ``C`` the total
    paid so far; each step's income is credited at its left endpoint, as in
    ``estimate_value``. These paths are for inspection and do not use the
    estimator's far-field jumps.
    """
    from .cir import _check_grid, _euler_paths

    n = _check_grid(r0, horizon, dt)
    level = strategy.spend_level(params)
    r = _euler_paths(params.a, params.b, params.delta, float(r0), dt, n, seed, 0, n_paths, True)
    X, C = _wealth_paths(r, level, float(mu), float(x0), float(dt))
    t = dt * np.arange(n + 1)
    return [(p, t[i], r[p, i], X[p, i], C[p, i]) for p in range(n_paths) for i in range(n + 1)]
