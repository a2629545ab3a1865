"""Command-line front end.

Subcommands map one-to-one onto module capabilities:

  eval       evaluate a divergence at a pair of distributions
  check      dpi | sufficiency | decomposable | shannon property checks
  generate   emit the (x, G, f) table of a generated family as CSV
  fit        fdiv | bregman representability fits
  verify     run one named scenario or all of them and emit a report

Option precedence is flags > config file (JSON, via --config) > built-in
defaults; --show-config prints the effective defaults.  Exit codes: 0 no
violation / all pass, 3 violation or scenario failure, 1 usage or data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import families, fitting, scenarios
from .checkers import (check_decomposable_binary, check_dpi,
                       check_shannon_inequality, check_sufficiency)
from .divergences import DivergenceError, ScalarFunction, resolve
from .simplex import Distribution, SimplexError

DEFAULTS = {
    "seed": 42,
    "n": 2,
    "grid": 50,
    "trials": 100_000,
    "suff_trials": 10_000,
    "pairs": 4000,
    "fdiv_knots": 2001,
    "bregman_knots": 801,
    "points": 512,
    "format": "json",
}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_ERROR)


def _build_parser() -> _Parser:
    p = _Parser(prog="divergence-lab",
                description="divergence families and property checkers on "
                            "finite probability simplices")
    p.add_argument("--config", help="JSON file with default overrides")
    p.add_argument("--show-config", action="store_true",
                   help="print the effective defaults and exit")
    sub = p.add_subparsers(dest="command")

    def common(sp, *names):
        if "divergence" in names:
            sp.add_argument("--divergence", help="catalog name or JSON spec path")
        if "n" in names:
            sp.add_argument("--n", type=int, help="alphabet size")
        if "grid" in names:
            sp.add_argument("--grid", type=int, help="grid resolution")
        if "trials" in names:
            sp.add_argument("--trials", type=int, help="random trial count")
        if "seed" in names:
            sp.add_argument("--seed", type=int, help="random seed")
        if "out" in names:
            sp.add_argument("--out", help="output file path")

    e = sub.add_parser("eval", help="evaluate a divergence at (P, Q)")
    common(e, "divergence")
    e.add_argument("--p", required=True, help="comma-separated distribution")
    e.add_argument("--q", required=True, help="comma-separated distribution")

    c = sub.add_parser("check", help="run a property check")
    c.add_argument("property", choices=["dpi", "sufficiency", "decomposable",
                                        "shannon"])
    common(c, "divergence", "n", "grid", "trials", "seed", "out")
    c.add_argument("--f", dest="scalar_f",
                   help="scalar function for shannon checks: clog:c,b or "
                        "poly:c0,c1,...")

    g = sub.add_parser("generate", help="emit a generated family table as CSV")
    g.add_argument("--h", dest="h_spec", required=True,
                   help="h description: name:..., poly:... or table:...")
    common(g, "out")
    g.add_argument("--points", type=int, help="rows in the emitted table")
    g.add_argument("--allow-invalid", action="store_true",
                   help="skip the h invariant checks")

    f = sub.add_parser("fit", help="representability fits")
    f.add_argument("kind", choices=["fdiv", "bregman"])
    common(f, "divergence", "seed", "out")
    f.add_argument("--pairs", type=int, help="number of sampled pairs")
    f.add_argument("--knots", type=int, help="knot count")
    f.add_argument("--summary-out", help="write the JSON summary here")

    v = sub.add_parser("verify", help="run verification scenarios")
    v.add_argument("target", help="'all' or a scenario id")
    common(v, "seed", "out")
    v.add_argument("--format", choices=["json", "markdown"], dest="format")
    v.add_argument("--list", action="store_true", help="list scenario ids")
    return p


def _effective(args, key, config):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return DEFAULTS[key]


def _parse_scalar_f(text: str) -> ScalarFunction:
    kind, _, rest = text.partition(":")
    if kind == "clog":
        c, b = (float(t) for t in rest.split(","))
        return ScalarFunction(lambda x: c * np.log(x) + b,
                              deriv=lambda x: c / np.asarray(x, dtype=float),
                              label=f"{c}*log(x)+{b}")
    if kind == "poly":
        coeffs = [float(t) for t in rest.split(",")]
        poly = np.polynomial.Polynomial(coeffs)
        dpoly = poly.deriv()
        return ScalarFunction(lambda x: poly(np.asarray(x, dtype=float)),
                              deriv=lambda x: dpoly(np.asarray(x, dtype=float)),
                              label=f"poly:{rest}")
    raise DivergenceError(f"cannot parse scalar function {text!r}")


def _print_witness(witness: dict) -> None:
    print("  witness:")
    print(f"    P            = {witness['P']}")
    print(f"    Q            = {witness['Q']}")
    if witness.get("channel") is not None:
        print(f"    channel      = {witness['channel']}")
    if witness.get("kind"):
        print(f"    kind         = {witness['kind']}")
    print(f"    value before = {witness['value_before']}")
    print(f"    value after  = {witness['value_after']}")
    print(f"    gap          = {witness['gap']}")


def _cmd_eval(args, config) -> int:
    d = resolve(_effective(args, "divergence", config) or "kl")
    p = Distribution.parse(args.p)
    q = Distribution.parse(args.q)
    print(repr(d.evaluate(p, q)))
    return EXIT_OK


def _cmd_check(args, config) -> int:
    seed = _effective(args, "seed", config)
    n = _effective(args, "n", config)
    if args.property == "shannon":
        if not args.scalar_f:
            raise DivergenceError("check shannon needs --f")
        fn = _parse_scalar_f(args.scalar_f)
        report = check_shannon_inequality(fn, n, _effective(args, "trials", config),
                                          seed)
    else:
        d = resolve(_effective(args, "divergence", config) or "kl")
        if args.property == "dpi":
            report = check_dpi(d, n, grid=_effective(args, "grid", config),
                               random_trials=_effective(args, "trials", config),
                               seed=seed)
        elif args.property == "sufficiency":
            report = check_sufficiency(d, n,
                                       trials=_effective(args, "suff_trials", config)
                                       if args.trials is None else args.trials,
                                       seed=seed)
        else:
            report = check_decomposable_binary(d, grid=_effective(args, "grid", config))
    doc = scenarios._json_safe(report.to_json_dict())
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"{report.property}: {report.verdict} "
          f"(trials={report.trials}, max_gap={report.max_gap!r})")
    if report.witness:
        _print_witness(report.witness)
    return EXIT_VIOLATION if report.violated else EXIT_OK


def _cmd_generate(args, config) -> int:
    gen = families.h_generator_from_spec(args.h_spec)
    out = args.out or "family.csv"
    families.write_family_csv(gen, out, points=_effective(args, "points", config),
                              validate=not args.allow_invalid)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_fit(args, config) -> int:
    d = resolve(_effective(args, "divergence", config) or "kl")
    seed = _effective(args, "seed", config)
    pairs = _effective(args, "pairs", config) if args.pairs is None else args.pairs
    if args.kind == "fdiv":
        knots = _effective(args, "fdiv_knots", config) if args.knots is None \
            else args.knots
        fit = fitting.fit_f_divergence(d, sample_pairs=pairs, knots=knots, seed=seed)
    else:
        knots = _effective(args, "bregman_knots", config) if args.knots is None \
            else args.knots
        fit = fitting.fit_bregman_binary(d, sample_pairs=pairs, knots=knots, seed=seed)
    if args.out:
        fit.write_csv(args.out)
    if args.summary_out:
        fit.write_summary(args.summary_out)
    print(json.dumps(fit.summary()))
    return EXIT_OK


def _cmd_verify(args, config) -> int:
    if args.list:
        for sid, (claim, _) in scenarios.SCENARIOS.items():
            print(f"{sid}: {claim}")
        return EXIT_OK
    seed = _effective(args, "seed", config)
    fmt = _effective(args, "format", config)
    if args.target == "all":
        results = scenarios.run_all(seed)
    else:
        results = [scenarios.run_scenario(args.target, seed)]
    for r in results:
        print(f"{r.scenario_id}: {r.status} ({r.runtime_seconds:.2f}s)")
    if args.out:
        scenarios.emit_report(results, args.out, fmt=fmt, seed=seed)
    else:
        if fmt == "json":
            print(json.dumps(scenarios.report_json_dict(results, seed), indent=2))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VIOLATION


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    config = {}
    try:
        if args.config:
            config = json.loads(Path(args.config).read_text())
        if args.show_config:
            print(json.dumps({**DEFAULTS, **config}, indent=2))
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_ERROR
        handler = {
            "eval": _cmd_eval,
            "check": _cmd_check,
            "generate": _cmd_generate,
            "fit": _cmd_fit,
            "verify": _cmd_verify,
        }[args.command]
        return handler(args, config)
    except (DivergenceError, SimplexError, families.FamilyError, KeyError,
            FileNotFoundError, ValueError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
