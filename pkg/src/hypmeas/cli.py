"""Command-line harness: ``hypmeas <subcommand> [flags]``.

Subcommands: check-concavity, dilate, localize, bounds, verify. Every run
writes a JSON report that echoes the merged configuration (flags over
``--config`` file over defaults) and the seed. Exit codes: 0 pass, 1 fail,
2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .core import as_alpha, beta_from_alpha
from .deviation import (
    dilation_lower_bound,
    large_deviation_bound,
    modulus_seminorm,
    norm_tail_bound,
    rate_function,
    small_ball_bound,
    small_deviation_bound,
)
from .dilation import contract_intervals_1d, dilate_intervals_1d, dilate_symmetric_complement
from .dilation import estimate_dilated_measure
from .errors import (
    BudgetError,
    ConstructionError,
    ConvergenceError,
    DomainError,
    HypothesisError,
    QuadratureError,
)
from .localization import run_localization
from .measures import LebesgueInterval, check_beta_concavity, make_model
from .needles import needle_to_dict
from .sets import Complement, EuclideanGauge, Interval, IntervalUnion, set_from_string

__all__ = ["main", "build_parser", "run_experiment", "emit_plot_data", "DEFAULTS"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "model": None,
    "set": None,
    "u": None,
    "v": None,
    "alpha": None,
    "delta": None,
    "r": None,
    "epsilon": None,
    "seed": 0,
    "samples": 100_000,
    "directions": 16,
    "max_steps": 60,
    "width_tol": 1e-3,
    "out": None,
    "plot": None,
    "seminorm": False,
    "inequality": None,
    "p": None,
    "q": None,
    "mu_b": None,
    "trials": 10_000,
    "backend": "auto",
}

SUBCOMMANDS = ("check-concavity", "dilate", "localize", "bounds", "verify")


class ConfigError(Exception):
    pass


def emit_plot_data(name: str, points, path) -> Path:
    """Write ``points`` as a two-column ``x,y`` CSV with 15 significant digits."""
    pts = list(points)
    if not pts:
        raise DomainError(f"series {name!r} is empty")
    path = Path(path)
    lines = ["x,y"] + [f"{float(x):.15g},{float(y):.15g}" for x, y in pts]
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


# --------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypmeas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file with default field values")
    common.add_argument("--model", default=S, help="model name or JSON descriptor")
    common.add_argument("--set", default=S, help="set descriptor (JSON or intervals:/ball:/not-ball:)")
    common.add_argument("--u", default=S, help="function u from the catalog")
    common.add_argument("--v", default=S, help="function v from the catalog")
    common.add_argument("--alpha", default=S, help="concavity parameter (float or -inf)")
    common.add_argument("--delta", type=float, default=S)
    common.add_argument("--r", type=float, default=S)
    common.add_argument("--epsilon", type=float, default=S)
    common.add_argument("--p", type=float, default=S, help="set measure for the rate function")
    common.add_argument("--q", type=float, default=S, help="measure for the dilation bound")
    common.add_argument("--mu-b", dest="mu_b", type=float, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--samples", type=int, default=S)
    common.add_argument("--trials", type=int, default=S)
    common.add_argument("--directions", type=int, default=S)
    common.add_argument("--max-steps", dest="max_steps", type=int, default=S)
    common.add_argument("--width-tol", dest="width_tol", type=float, default=S)
    common.add_argument("--backend", choices=("auto", "exact", "mc"), default=S)
    common.add_argument("--seminorm", action="store_true", default=S)
    common.add_argument("--inequality", default=S,
                        choices=("dilation", "duality", "deviation", "rate", "concavity"))
    common.add_argument("--out", default=S, help="report path (stdout when omitted)")
    common.add_argument("--plot", default=S, help="CSV path for plot-ready series")
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def merge_config(ns: argparse.Namespace, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    cfg = dict(DEFAULTS)
    flags = {k: v for k, v in vars(ns).items() if k not in ("config", "subcommand")}
    if getattr(ns, "config", None):
        try:
            file_cfg = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {ns.config}: {exc}") from exc
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"config: unknown fields {unknown}")
        cfg.update(file_cfg)
    if "seed" not in flags and environ.get("HYPMEAS_SEED"):
        try:
            cfg["seed"] = int(environ["HYPMEAS_SEED"])
        except ValueError as exc:
            raise ConfigError("HYPMEAS_SEED: not an integer") from exc
    cfg.update(flags)
    cfg["subcommand"] = ns.subcommand
    return cfg


def _require(cfg, *names):
    for n in names:
        if cfg.get(n) is None:
            raise ConfigError(f"{n}: required for {cfg['subcommand']}")


# ----------------------------------------------------------- experiments


def _alpha_for(cfg, model=None):
    if cfg.get("alpha") is not None:
        return as_alpha(cfg["alpha"])
    if model is not None:
        return model.alpha_declared
    raise ConfigError("alpha: required")


def _check_concavity(cfg):
    _require(cfg, "model")
    model = make_model(cfg["model"])
    alpha = _alpha_for(cfg, model)
    beta = beta_from_alpha(alpha, model.dim)
    rep = check_beta_concavity(model.density, beta, lambda k, r: model.sample(k, r),
                               cfg["trials"], cfg["seed"])
    return {"alpha": alpha.to_json(), "beta": beta.to_json(), **rep.to_dict()}, rep.passed


def _interval_F(model):
    if isinstance(model, LebesgueInterval):
        return model.a, model.b
    raise ConfigError("model: exact 1D dilation needs a Lebesgue interval model")


def _dilate(cfg):
    _require(cfg, "set", "delta")
    model = make_model(cfg["model"] or "lebesgue-1d")
    B = set_from_string(cfg["set"], model.dim)
    delta = float(cfg["delta"])
    if isinstance(B, IntervalUnion):
        F = _interval_F(model)
        D = dilate_intervals_1d(B, F, delta)
        lhs = D.measure / (F[1] - F[0])
        return {"kind": "exact_interval_union", "intervals": D.to_dict()["intervals"],
                "measure": lhs, "mu_B": B.measure / (F[1] - F[0])}, True
    res = estimate_dilated_measure(model, B, delta, cfg["samples"], cfg["directions"], cfg["seed"])
    out = res.to_dict()
    if isinstance(B, Complement) and isinstance(B.inner, EuclideanGauge) and delta > 0:
        # the contraction of the same set is exact for this family
        out["contraction"] = dilate_symmetric_complement(B.inner, 1.0 - delta).to_dict() \
            if delta < 1 else None
    return out, True


def _localize(cfg):
    _require(cfg, "model", "u", "v")
    model = make_model(cfg["model"])
    res = run_localization(model, cfg["u"], cfg["v"], max_steps=cfg["max_steps"],
                           width_tol=cfg["width_tol"], backend=cfg["backend"],
                           samples=min(cfg["samples"], 50_000), seed=cfg["seed"],
                           epsilon=cfg["epsilon"] or 0.0)
    out = res.to_dict()
    out["trace"] = res.trace
    if cfg.get("out"):
        trace_path = Path(cfg["out"]).with_suffix(".trace.jsonl")
        trace_path.write_text(res.trace_jsonl())
        needle_path = Path(cfg["out"]).with_suffix(".needle.json")
        needle_path.write_text(dumps(needle_to_dict(res.needle)))
        out["files"] = {"trace": str(trace_path), "needle": str(needle_path)}
    return out, res.passed


def _record(formula_id, inputs, value, ref):
    return {"formula_id": formula_id, "inputs": inputs, "value": value, "paper_ref": ref}


def _bounds(cfg):
    alpha = _alpha_for(cfg)
    a = alpha.to_json()
    recs = []
    series = []
    if cfg.get("delta") is not None and cfg.get("p") is not None:
        recs.append(_record("rate_function", {"alpha": a, "delta": cfg["delta"], "p": cfg["p"]},
                            rate_function(alpha, cfg["delta"], cfg["p"]), "rate function"))
    if cfg.get("delta") is not None:
        grid = np.linspace(0.0, 1.0, 11)
        series = [(p, rate_function(alpha, cfg["delta"], p)) for p in grid]
    if cfg.get("delta") is not None and cfg.get("q") is not None:
        recs.append(_record("dilation_lower_bound", {"alpha": a, "delta": cfg["delta"], "q": cfg["q"]},
                            dilation_lower_bound(alpha, cfg["delta"], cfg["q"]),
                            "dilation inequality"))
    if cfg.get("r") is not None:
        r = float(cfg["r"])
        if cfg.get("seminorm"):
            d = modulus_seminorm(1.0 / r)
            recs.append(_record("modulus_seminorm", {"epsilon": 1.0 / r}, d, "seminorm modulus"))
        elif cfg.get("delta") is not None:
            d = float(cfg["delta"])
        else:
            raise ConfigError("delta: modulus value needed (or pass --seminorm)")
        ld = large_deviation_bound(alpha, d, r)
        recs.append(_record("large_deviation", {"alpha": a, "modulus": d, "r": r}, ld.value,
                            "large deviation bound"))
        if ld.simplified is not None:
            recs.append(_record("large_deviation_simplified", {"alpha": a, "modulus": d, "r": r},
                                ld.simplified, "simplified large deviation bound"))
        if cfg.get("mu_b") is not None:
            nt = norm_tail_bound(alpha, cfg["mu_b"], r)
            recs.append(_record("norm_tail", {"alpha": a, "mu_B": cfg["mu_b"], "r": r},
                                nt.solved_tail_bound, "norm tail bound"))
    if cfg.get("epsilon") is not None:
        eps = float(cfg["epsilon"])
        d = modulus_seminorm(eps) if cfg.get("seminorm") else cfg.get("delta")
        if d is None:
            raise ConfigError("delta: modulus value needed (or pass --seminorm)")
        if cfg.get("seminorm"):
            recs.append(_record("modulus_seminorm", {"epsilon": eps}, d, "seminorm modulus"))
        recs.append(_record("small_deviation", {"alpha": a, "modulus": d},
                            small_deviation_bound(alpha, d), "small deviation bound"))
        recs.append(_record("small_ball", {"alpha": a, "epsilon": eps},
                            small_ball_bound(alpha, eps), "small ball bound"))
    if not recs:
        raise ConfigError("bounds: give --delta/--p, --delta/--q, --r or --epsilon")
    name = "rate_function"
    if not series and cfg.get("seminorm"):
        name = "modulus_seminorm"
        series = [(e, modulus_seminorm(e)) for e in np.linspace(0.1, 1.0, 10)]
    if cfg.get("plot") and series:
        emit_plot_data(name, series, cfg["plot"])
    return {"records": recs}, True


def _verify(cfg):
    _require(cfg, "inequality")
    kind = cfg["inequality"]
    if kind == "dilation":
        return _verify_dilation(cfg)
    if kind == "duality":
        return _verify_duality(cfg)
    if kind == "deviation":
        return _verify_deviation(cfg)
    if kind == "rate":
        return _verify_rate(cfg)
    if kind == "concavity":
        return _check_concavity(cfg)
    raise ConfigError(f"inequality: unknown {kind!r}")


def _report(ineq, params, lhs, se, rhs, exact, tol=1e-9):
    if exact or not se:
        margin = None
        ok = lhs >= rhs - tol
    else:
        margin = (lhs - rhs) / se
        ok = margin >= -3.0
    return {"inequality": ineq, "parameters": params, "lhs": lhs, "lhs_stderr": se,
            "rhs": rhs, "margin": margin, "pass": bool(ok)}, bool(ok)


def _verify_dilation(cfg):
    _require(cfg, "set", "delta")
    model = make_model(cfg["model"] or "lebesgue-1d")
    alpha = _alpha_for(cfg, model)
    B = set_from_string(cfg["set"], model.dim)
    delta = float(cfg["delta"])
    if isinstance(B, IntervalUnion):
        F = _interval_F(model)
        width = F[1] - F[0]
        lhs = dilate_intervals_1d(B, F, delta).measure / width
        p = B.measure / width
        rhs = rate_function(alpha, delta, p)
        return _report("dilation", {"delta": delta, "mu_B": p, "alpha": alpha.to_json()},
                       lhs, 0.0, rhs, True)
    res = estimate_dilated_measure(model, B, delta, cfg["samples"], cfg["directions"], cfg["seed"])
    p = res.metadata["mu_B_hat"]
    rhs = rate_function(alpha, delta, p)
    return _report("dilation", {"delta": delta, "mu_B": p, "alpha": alpha.to_json()},
                   res.value, res.std_error, rhs, False)


def _random_union(rng):
    k = int(rng.integers(1, 5))
    pts = np.sort(rng.random(2 * k))
    return IntervalUnion([Interval(pts[2 * i], pts[2 * i + 1], bool(rng.integers(2)),
                                   bool(rng.integers(2))) for i in range(k)])


def _verify_duality(cfg):
    rng = np.random.default_rng(cfg["seed"])
    trials = min(cfg["trials"], 1000)
    deltas = [cfg["delta"]] if cfg.get("delta") is not None else [i / 10 for i in range(1, 10)]
    bad = 0
    for _ in range(trials):
        A = _random_union(rng)
        for d in deltas:
            lhs = contract_intervals_1d(A, (0.0, 1.0), d).complement(0.0, 1.0)
            rhs = dilate_intervals_1d(A.complement(0.0, 1.0), (0.0, 1.0), d)
            bad += not lhs.is_close(rhs, 1e-10)
    ok = bad == 0
    return {"inequality": "duality", "trials": trials * len(deltas), "mismatches": bad,
            "pass": ok}, ok


def _verify_deviation(cfg):
    _require(cfg, "model", "r")
    model = make_model(cfg["model"])
    alpha = _alpha_for(cfg, model)
    X = model.sample(cfg["samples"], cfg["seed"])
    u = np.linalg.norm(X, axis=1)
    m = float(np.median(u))
    r = float(cfg["r"])
    n = u.shape[0]
    tail = float(np.mean(u >= m * r))
    bound = large_deviation_bound(alpha, modulus_seminorm(1.0 / r), r).value
    se = math.sqrt(max(bound * (1 - bound), 1e-300) / n)
    out = {"inequality": "deviation", "median": m, "r": r, "empirical_tail": tail,
           "bound": bound, "stderr": se}
    ok = tail <= bound + 3 * se
    if cfg.get("epsilon") is not None:
        eps = float(cfg["epsilon"])
        small = float(np.mean(u <= m * eps))
        sb = small_deviation_bound(alpha, modulus_seminorm(eps))
        se2 = math.sqrt(max(min(sb, 1) * (1 - min(sb, 1)), 1e-300) / n)
        out.update(empirical_small=small, small_bound=sb)
        ok &= small <= sb + 3 * se2
    out["pass"] = bool(ok)
    return out, bool(ok)


def _verify_rate(cfg):
    alpha = _alpha_for(cfg)
    grid = np.linspace(0.0, 1.0, 21)
    worst = 0.0
    for d in np.linspace(0.05, 0.95, 19):
        vals = np.array([rate_function(alpha, d, p) for p in grid])
        worst = max(worst, float(np.max(-np.diff(vals))), float(np.max(np.diff(vals, 2))))
    ok = worst <= 1e-10
    return {"inequality": "rate", "alpha": alpha.to_json(), "max_violation": worst,
            "pass": ok}, ok


_DISPATCH = {
    "check-concavity": _check_concavity,
    "dilate": _dilate,
    "localize": _localize,
    "bounds": _bounds,
    "verify": _verify,
}


def run_experiment(cfg: dict) -> tuple[dict, int]:
    """Run one configured experiment; returns the report and the exit code."""
    start = time.perf_counter()
    try:
        result, ok = _DISPATCH[cfg["subcommand"]](cfg)
        code = EXIT_PASS if ok else EXIT_FAIL
        error = None
    except (ConfigError, ConstructionError, DomainError, HypothesisError, ValueError) as exc:
        result, code, error = None, EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    except (QuadratureError, ConvergenceError, BudgetError, ArithmeticError) as exc:
        result, code, error = None, EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
    report = {
        "config": {k: cfg[k] for k in sorted(cfg)},
        "seed": cfg["seed"],
        "result": result,
        "pass": code == EXIT_PASS,
        "exit_code": code,
        "error": error,
        # excluded from determinism comparisons
        "timestamp": {
            "utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "runtime_seconds": round(time.perf_counter() - start, 6),
        },
    }
    return report, code


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = merge_config(ns, environ)
    except ConfigError as exc:
        print(f"hypmeas: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report, code = run_experiment(cfg)
    text = dumps(report)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    if report["error"]:
        print(f"hypmeas: {report['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
