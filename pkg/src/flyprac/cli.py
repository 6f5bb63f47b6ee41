"""Command line: simulate, sweep, analyze, validate.

Scenario settings come from built-in defaults, then an optional INI file
(``--config``, section ``[scenario]``), then explicit flags.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import sys
from dataclasses import fields

import numpy as np

from . import analysis, montecarlo
from .harness import ScenarioConfig, row_dict, run, sweep, write_rows

_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _field_types():
    return {f.name: f.type for f in fields(ScenarioConfig)}


def _convert(name: str, raw: str):
    t = str(_field_types()[name])
    raw = raw.strip()
    if "None" in t and raw.lower() in ("", "none"):
        return None
    if t.startswith("bool"):
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise argparse.ArgumentTypeError(f"{name}: not a boolean: {raw!r}") from None
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    return raw


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_scenario_flags(p: argparse.ArgumentParser):
    for f in fields(ScenarioConfig):
        if f.name in ("trials", "master_seed"):
            continue  # global --trials / --seed
        p.add_argument(_flag(f.name), dest=f.name, default=None, metavar=f.name.upper(),
                       help=f"default: {f.default}")


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep case: R and g are different keys
    if not cp.read(path):
        raise SystemExit(f"cannot read config file {path}")
    if not cp.has_section("scenario"):
        return {}
    known = _field_types()
    out = {}
    for k, v in cp.items("scenario"):
        key = k.replace("-", "_")
        if key not in known:
            raise SystemExit(f"unknown scenario key {k!r} in {path}")
        out[key] = _convert(key, v)
    return out


def scenario_from_args(args) -> ScenarioConfig:
    kw = load_config(args.config)
    for f in fields(ScenarioConfig):
        if f.name in ("trials", "master_seed"):
            continue
        raw = getattr(args, f.name, None)
        if raw is not None:
            kw[f.name] = _convert(f.name, raw)
    if args.seed is not None:
        kw["master_seed"] = args.seed
    if args.trials is not None:
        kw["trials"] = args.trials
    return ScenarioConfig(**kw)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def parse_grid(items) -> dict[str, list]:
    """``key=v1,v2`` items into an ordered grid of typed values."""
    grid: dict[str, list] = {}
    known = _field_types()
    for item in items or []:
        key, _, vals = item.partition("=")
        key = key.strip().replace("-", "_")
        if key not in known:
            raise SystemExit(f"unknown grid parameter {key!r}")
        grid[key] = [_convert(key, v) for v in vals.split(",") if v.strip() != ""]
    return grid


def cmd_simulate(args) -> int:
    sc = scenario_from_args(args)
    m = run(sc, args.workers)
    buf = io.StringIO()
    write_rows([row_dict(sc, m)], buf)
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_sweep(args) -> int:
    base = scenario_from_args(args)
    text = sweep(base, parse_grid(args.grid), workers=args.workers)
    _emit(text, args.out)
    return 0


ANALYZE_COLUMNS = ["epsilon", "b", "R", "l", "s", "g", "n_p",
                   "p_symbol_ok", "p_column_ok", "expected_inconsistent_columns", "p_even", "p_zero",
                   "p_fpe_round", "p_no_estimation_failure", "p_undetected", "p_sr", "p_sr_printed",
                   "p_fpc", "mc_p_fpe_round", "mc_columns"]


def cmd_analyze(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ANALYZE_COLUMNS, lineterminator="\n", restval="")
    w.writeheader()
    for eps in args.epsilon:
        for R in args.R:
            p = analysis.AnalysisParams(epsilon=eps, b=args.b, R=R, l=args.l, s=args.s, g=args.g,
                                        n_p=args.n_p)
            row = {"epsilon": eps, "b": p.b, "R": R, "l": p.l, "s": p.s, "g": p.g,
                   "n_p": p.segment_bits}
            row.update({k: repr(v) for k, v in p.evaluate().items()})
            if args.mc:
                est = montecarlo.column_false_positive_frequency(eps, R, p.b, args.mc, rng)
                row["mc_p_fpe_round"] = repr(est.value)
                row["mc_columns"] = args.mc
            w.writerow(row)
    _emit(buf.getvalue(), args.out)
    return 0


def validation_suite(columns: int, segments: int, rng: np.random.Generator):
    """(name, formula, simulated, relative error) tuples for the standard checks."""
    rows = []
    for b in (1, 8):
        for eps in (1e-3, 1e-2):
            f = analysis.p_fpe_round(eps, 20, b)
            m = montecarlo.column_false_positive_frequency(eps, 20, b, columns, rng).value
            rows.append((f"p_fpe_round eps={eps} R=20 b={b}", f, m))
    f = analysis.p_symbol_ok(1e-3, 8)
    rows.append(("p_symbol_ok eps=1e-3 b=8", f,
                 montecarlo.symbol_ok_frequency(1e-3, 8, columns, rng).value))
    f = analysis.p_undetected(15, 1e-3)
    rows.append(("p_undetected n_p=15 eps=1e-3", f,
                 montecarlo.undetected_stratified(15, 1e-3, max(columns // 10, 1000), rng)))
    f = analysis.p_successful_segment_recovery(15, 1e-3)
    rows.append(("p_sr n_p=15 eps=1e-3", f,
                 montecarlo.segment_recovery_frequency(15, 1e-3, segments, rng).value))
    return [(n, f, m, abs(m - f) / f if f else float("nan")) for n, f, m in rows]


def cmd_validate(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "formula", "monte_carlo", "relative_error"])
    for name, f, m, rel in validation_suite(args.columns, args.segments, rng):
        w.writerow([name, repr(f), repr(m), repr(rel)])
    _emit(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="flyprac", description=__doc__)
    top.add_argument("--config", help="INI file with a [scenario] section")
    top.add_argument("--seed", type=int, default=None, help="master seed")
    top.add_argument("--trials", type=int, default=None, help="trials per scenario")
    top.add_argument("--out", help="write CSV here instead of stdout")
    top.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario")
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter grid")
    _add_scenario_flags(p)
    p.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                   help="grid axis; repeat for a Cartesian product")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="evaluate closed-form probabilities")
    p.add_argument("--epsilon", type=float, nargs="+", default=[1e-3])
    p.add_argument("--R", type=int, nargs="+", default=[10])
    p.add_argument("--b", type=int, default=8)
    p.add_argument("--l", type=int, default=50)
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--g", type=int, default=100)
    p.add_argument("--n-p", dest="n_p", type=int, default=None)
    p.add_argument("--mc", type=int, default=0, metavar="COLUMNS",
                   help="also simulate this many columns per row")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="formula versus Monte-Carlo checks")
    p.add_argument("--columns", type=int, default=10**6)
    p.add_argument("--segments", type=int, default=10**5)
    p.set_defaults(func=cmd_validate)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:  # ConfigError and friends
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
