"""Command-line front end: risk, hedge, price, and check commands.

Reads scenario markets from CSV (header ``prob,dS_1..dS_n,H``), runs the
requested computation, and prints one JSON document to stdout. Floats are
serialized with 12 significant digits through a fixed-order emitter, so a
given (input, flags, seed) triple always produces byte-identical output.
Exit codes: 0 success, 2 domain error, 3 parse error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import HedgekitError, ParseError
from .hedge import (
    GaussianMarket,
    SolverOptions,
    solve_gaussian_es_exp,
    solve_gaussian_meanvar,
    solve_numeric,
)
from .market import (
    ConstraintSet,
    Market,
    box,
    budget_hyperplane,
    hedged_position,
    long_only_simplex,
    unconstrained,
)
from .preference import (
    AFFINE,
    EXPONENTIAL,
    ComposedPreference,
    affine,
    exponential,
    shortfall,
    u_map,
)
from .riskmeasures import (
    ENTROPIC,
    EXPECTED_SHORTFALL,
    NEG_EXPECTATION,
    entropic,
    expected_shortfall,
    neg_expectation,
    rho_eval,
    value_at_risk,
)
from .pricing import check_arbitrage, check_complete, price_report
from .scenario import Measure, Rv, ScenarioSpace, make_space


# ---------------------------------------------------------------------------
# Scenario file format.
# ---------------------------------------------------------------------------

def parse_scenarios(path: str, v0: float = 1.0) -> tuple[Market, ScenarioSpace]:
    """Read a scenario market from CSV.

    First row must be the header prob, dS_1..dS_n, H; each later row is one
    scenario: its probability, the n price increments, the claim payoff.
    """
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: empty file, expected a header row")
    header = [c.strip() for c in rows[0]]
    if len(header) < 3 or header[0] != "prob" or header[-1] != "H":
        raise ParseError(
            f"{path}: header must be prob, dS_1..dS_n, H; got {','.join(header)}"
        )
    n = len(header) - 2
    for j in range(n):
        want = f"dS_{j + 1}"
        if header[1 + j] != want:
            raise ParseError(f"{path}: header column {j + 2} must be {want!r}")
    weights, incr, payoff = [], [], []
    for i, row in enumerate(rows[1:], start=2):
        cells = [c.strip() for c in row]
        if len(cells) != n + 2:
            raise ParseError(f"{path}: row {i} has {len(cells)} cells, expected {n + 2}")
        vals = []
        for j, cell in enumerate(cells):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: row {i}, column {header[j]!r}: not a number: {cell!r}"
                ) from None
        weights.append(vals[0])
        incr.append(vals[1:-1])
        payoff.append(vals[-1])
    if not weights:
        raise ParseError(f"{path}: no scenario rows")
    space = make_space(np.asarray(weights))
    market = Market(
        delta_s=np.asarray(incr),
        claim=Rv(np.asarray(payoff)),
        v0=v0,
        space=space,
    )
    return market, space


def write_scenarios(market: Market, path: str) -> None:
    """Serialize a market back to the CSV scenario format, round-trip safe."""
    n = market.n_assets
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(["prob"] + [f"dS_{j + 1}" for j in range(n)] + ["H"])
        for i in range(market.space.k):
            row = [format(market.space.weights[i], ".17g")]
            row += [format(v, ".17g") for v in market.delta_s[i]]
            row.append(format(market.claim.values[i], ".17g"))
            out.writerow(row)


# ---------------------------------------------------------------------------
# Deterministic JSON.
# ---------------------------------------------------------------------------

def _emit(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if obj is True or obj is False:
        return "true" if obj else "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        text = format(x, ".12g")
        return "0" if text in ("-0", "-0.0") else text
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [_emit(v, indent + 1) for v in obj]
        if not items:
            return "[]"
        inner = ",\n".join("  " * (indent + 1) + s for s in items)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            "  " * (indent + 1) + json.dumps(k) + ": " + _emit(v, indent + 1)
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_json(payload: dict) -> str:
    return _emit(payload) + "\n"


# ---------------------------------------------------------------------------
# Configuration.
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    scenarios: str | None = None
    gaussian: tuple[str, str] | None = None
    measure: str | None = None
    alpha: float | None = None
    a: float | None = None
    utility: str | None = None
    b: float = 1.0
    constraint: str = "none"
    box_lo: str | None = None
    box_hi: str | None = None
    v0: float = 1.0
    seed: int = 0
    out: str | None = None
    report: str | None = None
    max_iter: int = 50_000
    step_c: float = 1.0
    tol_residual: float = 1e-6
    multistarts: int = 8
    method: str = "auto"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenarios", metavar="FILE", help="scenario CSV input")
    common.add_argument(
        "--gaussian",
        nargs=2,
        metavar=("MU", "SIGMA"),
        help="mean vector and covariance matrix CSV files (hedge only)",
    )
    common.add_argument("--measure", choices=["negexp", "entropic", "es", "var"])
    common.add_argument("--alpha", type=float, help="tail level for es/var")
    common.add_argument("--a", type=float, help="risk aversion for entropic/exp")
    common.add_argument("--utility", choices=["affine", "exp", "shortfall"])
    common.add_argument("--b", type=float, default=1.0, help="affine utility slope")
    common.add_argument(
        "--constraint", choices=["none", "budget", "longonly", "box"], default="none"
    )
    common.add_argument("--box-lo", help="comma-separated lower bounds (box)")
    common.add_argument("--box-hi", help="comma-separated upper bounds (box)")
    common.add_argument("--v0", type=float, default=1.0, help="initial capital")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", metavar="FILE", help="also write the JSON here")
    common.add_argument("--report", metavar="DIR", help="write CSV + figures here")
    common.add_argument("--max-iter", type=int, default=50_000)
    common.add_argument("--step-c", type=float, default=1.0)
    common.add_argument("--tol-residual", type=float, default=1e-6)
    common.add_argument("--multistarts", type=int, default=8)
    common.add_argument("--method", choices=["auto", "lp", "subgradient"], default="auto")

    parser = argparse.ArgumentParser(
        prog="hedgekit",
        description="Optimal hedging under convex risk composed with utility.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("risk", parents=[common], help="evaluate the risk of the unhedged book")
    sub.add_parser("hedge", parents=[common], help="solve the optimal hedging problem")
    sub.add_parser("price", parents=[common], help="indifference prices and bounds")
    sub.add_parser("check", parents=[common], help="arbitrage and completeness checks")
    return parser


def _config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        scenarios=ns.scenarios,
        gaussian=tuple(ns.gaussian) if ns.gaussian else None,
        measure=ns.measure,
        alpha=ns.alpha,
        a=ns.a,
        utility=ns.utility,
        b=ns.b,
        constraint=ns.constraint,
        box_lo=ns.box_lo,
        box_hi=ns.box_hi,
        v0=ns.v0,
        seed=ns.seed,
        out=ns.out,
        report=ns.report,
        max_iter=ns.max_iter,
        step_c=ns.step_c,
        tol_residual=ns.tol_residual,
        multistarts=ns.multistarts,
        method=ns.method,
    )


def _need(cfg: RunConfig, name: str):
    value = getattr(cfg, name)
    if value is None:
        raise HedgekitError(f"command {cfg.command!r} needs --{name}")
    return value


def _measure_spec(cfg: RunConfig):
    kind = _need(cfg, "measure")
    if kind == "negexp":
        return neg_expectation()
    if kind == "entropic":
        if cfg.a is None:
            raise HedgekitError("measure 'entropic' needs --a")
        return entropic(cfg.a)
    alpha = cfg.alpha
    if alpha is None:
        raise HedgekitError(f"measure {kind!r} needs --alpha")
    return expected_shortfall(alpha) if kind == "es" else value_at_risk(alpha)


def _utility_spec(cfg: RunConfig):
    kind = _need(cfg, "utility")
    if kind == "affine":
        return affine(0.0, cfg.b)
    if kind == "exp":
        if cfg.a is None:
            raise HedgekitError("utility 'exp' needs --a")
        return exponential(cfg.a)
    return shortfall()


def _bounds_vector(text: str | None, n: int, flag: str) -> np.ndarray:
    if text is None:
        raise HedgekitError(f"constraint 'box' needs --{flag}")
    try:
        vals = [float(c) for c in text.split(",")]
    except ValueError:
        raise HedgekitError(f"--{flag} must be comma-separated numbers") from None
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n:
        raise HedgekitError(f"--{flag} has {len(vals)} entries, expected {n}")
    return np.asarray(vals)


def _constraint_set(cfg: RunConfig, n: int) -> ConstraintSet:
    kind = cfg.constraint
    if kind == "none":
        return unconstrained()
    if kind == "budget":
        return budget_hyperplane()
    if kind == "longonly":
        return long_only_simplex()
    return box(_bounds_vector(cfg.box_lo, n, "box-lo"), _bounds_vector(cfg.box_hi, n, "box-hi"))


def _solver_options(cfg: RunConfig) -> SolverOptions:
    return SolverOptions(
        max_iter=cfg.max_iter,
        step_c=cfg.step_c,
        tol_residual=cfg.tol_residual,
        seed=cfg.seed,
        multistarts=cfg.multistarts,
        method=cfg.method,
    )


def _load_market(cfg: RunConfig) -> Market:
    path = _need(cfg, "scenarios")
    market, _ = parse_scenarios(path, v0=cfg.v0)
    return market


# ---------------------------------------------------------------------------
# Commands.
# ---------------------------------------------------------------------------

def _run_risk(cfg: RunConfig):
    market = _load_market(cfg)
    rho = _measure_spec(cfg)
    u = _utility_spec(cfg)
    pos = hedged_position(market, np.zeros(market.n_assets))
    value = rho_eval(rho, Rv(u_map(u, pos.values)), market.space)
    return {"value": value}, {"market": market, "position": pos}


def _read_matrix(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def _run_hedge_gaussian(cfg: RunConfig):
    mu = _read_matrix(cfg.gaussian[0]).ravel()
    sigma = _read_matrix(cfg.gaussian[1])
    gm = GaussianMarket(mu=mu, sigma=sigma)
    if cfg.constraint != "budget":
        raise HedgekitError("gaussian closed forms need --constraint budget")
    rho = _measure_spec(cfg)
    u = _utility_spec(cfg)
    pref = ComposedPreference(rho, u)
    if rho.kind == NEG_EXPECTATION and u.kind == EXPONENTIAL:
        sol = solve_gaussian_meanvar(gm, u.a, pref)
    elif rho.kind == ENTROPIC and u.kind == AFFINE:
        sol = solve_gaussian_meanvar(gm, rho.a * u.b, pref)
    elif rho.kind == EXPECTED_SHORTFALL and u.kind == EXPONENTIAL:
        sol = solve_gaussian_es_exp(gm, u.a, rho.alpha, _solver_options(cfg))
    else:
        raise HedgekitError(
            "gaussian route supports (negexp, exp), (entropic, affine), (es, exp)"
        )
    payload = {
        "h": list(sol.h),
        "value": sol.value,
        "lambda": sol.multiplier,
        "residual": sol.residual,
        "witness_density": None,
    }
    return payload, {"gaussian": gm, "solution": sol}


def _run_hedge(cfg: RunConfig):
    if cfg.gaussian is not None:
        return _run_hedge_gaussian(cfg)
    market = _load_market(cfg)
    pref = ComposedPreference(_measure_spec(cfg), _utility_spec(cfg))
    cset = _constraint_set(cfg, market.n_assets)
    sol = solve_numeric(pref, market, cset, _solver_options(cfg))
    payload = {
        "h": list(sol.h),
        "value": sol.value,
        "lambda": sol.multiplier,
        "residual": sol.residual,
        "witness_density": list(sol.witness.density) if sol.witness else None,
    }
    return payload, {"market": market, "solution": sol}


def _run_price(cfg: RunConfig):
    market = _load_market(cfg)
    pref = ComposedPreference(_measure_spec(cfg), _utility_spec(cfg))
    cset = _constraint_set(cfg, market.n_assets)
    rep = price_report(pref, market, cset, _solver_options(cfg))
    payload = {
        "sp": rep.sp,
        "bp": rep.bp,
        "superhedge": rep.superhedge,
        "subhedge": rep.subhedge,
        "arbitrage_free": rep.arbitrage_free,
        "complete": rep.complete,
    }
    return payload, {"market": market, "report": rep}


def _run_check(cfg: RunConfig):
    market = _load_market(cfg)
    payload = {
        "arbitrage_free": check_arbitrage(market),
        "complete": check_complete(market),
    }
    return payload, {"market": market}


_COMMANDS = {
    "risk": _run_risk,
    "hedge": _run_hedge,
    "price": _run_price,
    "check": _run_check,
}


def run(config: RunConfig) -> str:
    """Execute one command and return its JSON report text."""
    payload, context = _COMMANDS[config.command](config)
    text = render_json(payload)
    if config.report:
        from . import report

        report.render(config.command, payload, context, config.report)
    return text


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = _config_from_args(ns)
    try:
        text = run(cfg)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (HedgekitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
