"""Command-line interface: ``cirdiv <command> [options]``.

stdout carries data (JSON or CSV), stderr carries errors as JSON. Exit status
is 0 on success, 2 for invalid input or a regime mismatch and 3 for a
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from .barrier import rstar_sweep, solve_barrier, solve_rstar
from .brownian import BrownianModel, mc_dividends, value_brownian
from .cir import simulate_path
from .integrals import Functionals
from .mc import (
    McConfig,
    Strategy,
    estimate_value,
    last_exit_expectation,
    last_exit_normalizer,
    set_threads,
    simulate_last_exit,
    simulate_strategy_paths,
)
from .params import CirDivError, CirParams, DomainError, NumericalError, Regime
from .quadrature import QuadratureError
from .value import ValueFunction

SCHEMA = "cirdiv/1"
FIG1_DELTAS = (0.09, 0.045, 0.02)


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through the JSON error path
        raise UsageError(message)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json(command: str, payload: dict) -> str:
    return json.dumps({"schema": SCHEMA, "command": command, **payload}, indent=2, allow_nan=True) + "\n"


def _params(ns) -> CirParams:
    return CirParams(ns.a, ns.b, ns.delta)


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1 or hi < lo:
        raise DomainError("grid needs n >= 1 and max >= min")
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def _rx_grid(ns, vf: ValueFunction):
    r_hi = ns.r_max if ns.r_max is not None else (vf.rstar + 3.0 if vf.regime is Regime.HIGH_VOL else 3.0)
    return _grid(ns.r_min, r_hi, ns.nr), _grid(ns.x_min, ns.x_max, ns.nx)


# -- commands -----------------------------------------------------------------


def cmd_barrier(ns) -> str:
    p = _params(ns)
    if ns.mu is None:
        sol = solve_rstar(p)
    else:
        sol, _ = solve_barrier(p, ns.mu)
    return _json("barrier", {"params": p.as_dict(), "mu": ns.mu, "R": p.R, **sol.as_dict()})


def cmd_value(ns) -> str:
    vf = ValueFunction.build(_params(ns), ns.mu)
    if ns.r is not None or ns.x is not None:
        if ns.r is None or ns.x is None:
            raise DomainError("--r and --x go together")
        v = vf.evaluate(ns.r, ns.x)
        rec = {"r": ns.r, "x": ns.x, "v": v, "branch": vf.branch(ns.r)}
        if ns.format == "csv":
            return _csv(["r", "x", "v", "branch"], [list(rec.values())])
        return _json("value", {"params": vf.params.as_dict(), "mu": ns.mu, "regime": vf.regime.value, **rec})
    rs, xs = _rx_grid(ns, vf)
    rows = [(r, x, vf.evaluate(r, x), vf.branch(r)) for r in rs for x in xs]
    if ns.format == "json":
        return _json("value", {"params": vf.params.as_dict(), "mu": ns.mu,
                               "rows": [dict(zip(["r", "x", "v", "branch"], row)) for row in rows]})
    return _csv(["r", "x", "v", "branch"], rows)


def cmd_hjb(ns) -> str:
    vf = ValueFunction.build(_params(ns), ns.mu)
    if ns.r is not None and ns.x is not None:
        points = [(ns.r, ns.x)]
    else:
        rs, xs = _rx_grid(ns, vf)
        points = [(r, x) for r in rs for x in xs]
    rows = []
    for r, x in points:
        rep = vf.hjb_check(r, x)
        rows.append((r, x, rep.generator_part, rep.gradient_part, rep.active_branch))
    if ns.format == "json":
        return _json("hjb", {"params": vf.params.as_dict(), "mu": ns.mu,
                             "rows": [dict(zip(["r", "x", "Lv", "grad", "active"], row)) for row in rows]})
    return _csv(["r", "x", "Lv", "grad", "active"], rows)


def _cfg(ns, paths, dt, horizon, seed) -> McConfig:
    return McConfig(n_paths=int(paths), dt=float(dt), horizon=float(horizon), seed=int(seed),
                    antithetic=bool(getattr(ns, "antithetic", False)), threads=ns.threads)


def cmd_simulate(ns) -> str:
    p = _params(ns)
    strategy = Strategy.parse(ns.strategy)
    cfg = _cfg(ns, ns.paths, ns.dt, ns.horizon, ns.seed)
    est = estimate_value(p, ns.mu, strategy, ns.r0, ns.x0, cfg)
    if ns.emit_paths:
        rows = simulate_strategy_paths(p, ns.mu, strategy, ns.r0, ns.x0, ns.dt, ns.horizon, ns.seed, ns.emit_count)
        with open(ns.emit_paths, "w", newline="") as fh:
            fh.write(_csv(["path_id", "t", "r", "X", "C"], rows))
    return _json("simulate", {"params": p.as_dict(), "mu": ns.mu, "strategy": strategy.describe(),
                              "level": strategy.spend_level(p), "r0": ns.r0, "x0": ns.x0, "estimate": est.as_dict(),
                              "tail_ok": est.tail_ok})


def cmd_brownian(ns) -> str:
    model = BrownianModel(ns.mu, ns.sigma, ns.b, ns.delta)
    out = {"model": model.as_dict(), "theta": model.theta, "zeta": model.zeta, "varrho": model.varrho,
           "r0": ns.r0, "x0": ns.x0, "value": value_brownian(model, ns.r0, ns.x0)}
    if ns.simulate:
        paths, dt, horizon, seed = ns.simulate
        est = mc_dividends(model, ns.r0, ns.x0, _cfg(ns, paths, dt, horizon, seed))
        out["mc"] = est.as_dict()
    return _json("brownian", out)


def cmd_last_exit(ns) -> str:
    p = _params(ns)
    out = {"params": p.as_dict(), "expectation": last_exit_expectation(p), "normalizer": last_exit_normalizer(p)}
    if ns.simulate:
        eps, paths, dt, horizon, seed = ns.simulate
        out["mc"] = simulate_last_exit(p, float(eps), _cfg(ns, paths, dt, horizon, seed)).as_dict()
        out["mc"]["eps"] = float(eps)
    return _json("last-exit", out)


def cmd_table(ns) -> str:
    if ns.fig1:
        rows = []
        for i, d in enumerate(FIG1_DELTAS):
            path = simulate_path(CirParams(ns.a, ns.b, d), ns.r0, ns.horizon, ns.dt, ns.seed, i)
            rows.extend((i, d, t, r) for t, r in zip(path.times, path.values))
        return _csv(["path_id", "delta", "t", "r"], rows)
    if ns.panel == "sweep":
        deltas = _grid(ns.delta_min, ns.delta_max, ns.n)
        rstar = rstar_sweep(ns.a, ns.b, deltas)
        return _csv(["delta", "delta2", "rstar"], zip(deltas, deltas**2, rstar))
    p = _params(ns)
    if ns.panel == "functionals":
        rstar = solve_rstar(p).rstar if ns.rstar is None else ns.rstar
        fn = Functionals(p, rstar)
        hi = ns.r_max if ns.r_max is not None else rstar + 3.0
        rows = []
        for r in _grid(0.0, hi, ns.nr):
            below, above = r <= rstar, r >= rstar and r > 0
            rows.append((
                r,
                float(fn.psi1(r)) if below else math.nan,
                float(fn.phi1(r)) if above else math.nan,
                float(fn.phi1_prime(r)) if above else math.nan,
                float(fn.phi2(r)) if above else math.nan,
            ))
        return _csv(["r", "psi1", "phi1", "phi1_prime", "phi2"], rows)
    vf = ValueFunction.build(p, ns.mu)
    rs, xs = _rx_grid(ns, vf)
    return _csv(["r", "x", "v", "piece"], [(r, x, vf.evaluate(r, x), vf.branch(r)) for r in rs for x in xs])


# -- parser -------------------------------------------------------------------


def _cir_args(sp, delta_required: bool = True) -> None:
    sp.add_argument("--a", type=float, required=True, help="drift slope a > 0")
    sp.add_argument("--b", type=float, required=True, help="drift intercept b > 0")
    sp.add_argument("--delta", type=float, required=delta_required, help="volatility delta > 0")


def _grid_args(sp) -> None:
    sp.add_argument("--r-min", type=float, default=0.0)
    sp.add_argument("--r-max", type=float, default=None, help="default r* + 3 (or 3 in the low-volatility regime)")
    sp.add_argument("--nr", type=int, default=30)
    sp.add_argument("--x-min", type=float, default=0.0)
    sp.add_argument("--x-max", type=float, default=5.0)
    sp.add_argument("--nx", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cirdiv", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for simulations (fallback: CIRDIV_THREADS)")
    parser.add_argument("--output", "-o", default=None, help="write the result here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("barrier", help="optimal barrier r* and smooth-fit constant")
    _cir_args(sp)
    sp.add_argument("--mu", type=float, default=None, help="income rate; adds tildeF")
    sp.set_defaults(func=cmd_barrier)

    for name, func, helptext in (("value", cmd_value, "value function V(r, x)"),
                                 ("hjb", cmd_hjb, "pointwise HJB check")):
        sp = sub.add_parser(name, help=helptext)
        _cir_args(sp)
        sp.add_argument("--mu", type=float, required=True)
        sp.add_argument("--r", type=float, default=None)
        sp.add_argument("--x", type=float, default=None)
        _grid_args(sp)
        sp.add_argument("--format", choices=["json", "csv"], default=None)
        sp.set_defaults(func=func)

    sp = sub.add_parser("simulate", help="Monte-Carlo value of a consumption strategy")
    _cir_args(sp)
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--strategy", required=True, help="max | zero | barrier:LEVEL")
    sp.add_argument("--r0", type=float, required=True)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--paths", type=int, default=10_000)
    sp.add_argument("--dt", type=float, default=1e-2)
    sp.add_argument("--horizon", type=float, default=1000.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--antithetic", action="store_true")
    sp.add_argument("--emit-paths", default=None, metavar="FILE.csv")
    sp.add_argument("--emit-count", type=int, default=3, help="number of paths written by --emit-paths")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("brownian", help="dividend barrier for a Brownian surplus (a = delta^2/2)")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--r0", type=float, required=True)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--simulate", nargs=4, type=float, default=None, metavar=("PATHS", "DT", "HORIZON", "SEED"))
    sp.set_defaults(func=cmd_brownian)

    sp = sub.add_parser("last-exit", help="expected last time at zero")
    _cir_args(sp)
    sp.add_argument("--simulate", nargs=5, type=float, default=None,
                    metavar=("EPS", "PATHS", "DT", "HORIZON", "SEED"))
    sp.set_defaults(func=cmd_last_exit)

    sp = sub.add_parser("table", help="plot data: value surface, r* sweep, functionals or sample paths")
    _cir_args(sp, delta_required=False)
    sp.add_argument("--panel", choices=["value", "sweep", "functionals"], default="value")
    sp.add_argument("--fig1", action="store_true", help="three sample paths with delta in {0.09, 0.045, 0.02}")
    sp.add_argument("--mu", type=float, default=0.5)
    _grid_args(sp)
    sp.add_argument("--rstar", type=float, default=None, help="barrier for --panel functionals (default r*)")
    sp.add_argument("--delta-min", type=float, default=0.05)
    sp.add_argument("--delta-max", type=float, default=0.12)
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--r0", type=float, default=0.5)
    sp.add_argument("--horizon", type=float, default=1000.0)
    sp.add_argument("--dt", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_table)
    return parser


def _threads(ns) -> None:
    if ns.threads is None and os.environ.get("CIRDIV_THREADS"):
        try:
            ns.threads = int(os.environ["CIRDIV_THREADS"])
        except ValueError:
            raise DomainError("CIRDIV_THREADS must be an integer") from None
    if ns.threads is not None:
        set_threads(ns.threads)


def _fail(exc: Exception, code: int) -> int:
    err = {"schema": SCHEMA, "error": {"type": type(exc).__name__, "message": str(exc)}, "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if getattr(ns, "format", "missing") is None:
            ns.format = "json" if (ns.r is not None and ns.x is not None) else "csv"
        if ns.command == "table" and not ns.fig1 and ns.panel != "sweep" and ns.delta is None:
            raise UsageError("--delta is required unless --panel sweep or --fig1 is given")
        _threads(ns)
        text = ns.func(ns)
    except (NumericalError, QuadratureError, ArithmeticError) as exc:
        return _fail(exc, 3)
    except (CirDivError, ValueError) as exc:
        return _fail(exc, 2)
    except OSError as exc:
        return _fail(exc, 2)
    if ns.output:
        with open(ns.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
