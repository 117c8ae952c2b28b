"""Command-line front end.

Exit codes: 0 success, 1 violated diagram relation, 2 input or usage error,
3 non-equivalent density passed to ``improve``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import diagram
from .errors import DomainError, InstanceTooLarge, NonEquivalentDensityError
from .improve import improve
from .instance import InstanceError, dumps, generate_instance, load_instance, load_json, parse_curve, parse_payoff
from .payoff import BudgetSpec
from .solve import infsup_value, supinf_value
from .utility import concavify, sample_curves

OK, VIOLATED, BAD_INPUT, NON_EQUIVALENT = 0, 1, 2, 3
ORACLE_STATES, ORACLE_EXTREMES = 6, 4


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _finite(v):
    return v if isinstance(v, (int, float)) and math.isfinite(v) else None


def cmd_concavify(args) -> int:
    data = load_json(args.input)
    curve = parse_curve(data.get("utility", data) if isinstance(data, dict) else data)
    env = concavify(curve)
    _write(dumps({"envelope": env.to_dict()}), args.output)
    rows = sample_curves(curve, args.x_max, args.points)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "U", "Uc"])
    writer.writerows([[repr(float(v)) for v in row] for row in rows])
    if args.csv:
        Path(args.csv).write_text(buf.getvalue())
    elif args.output is None:
        sys.stdout.write(buf.getvalue())
    return OK


def cmd_improve(args) -> int:
    inst = load_instance(args.input)
    payoff = parse_payoff(load_json(args.payoff), inst.space.n)
    if not 0 <= args.density < len(inst.family):
        raise InstanceError(f"--density {args.density} out of range for {len(inst.family)} extremes")
    density = inst.family.extremes[args.density]
    star, plan = improve(payoff, inst.space, density, inst.pricing, inst.curve, conditional=args.conditional)
    _write(dumps({"payoff": {"states": star.to_list()}, "plan": plan.to_dict()}), args.output)
    return OK


def cmd_solve(args) -> int:
    inst = load_instance(args.input)
    constrained = inst.budget.constrained or args.constrained
    budget = BudgetSpec(inst.budget.x, constrained)
    a = (inst.space, inst.family, inst.pricing, inst.curve, budget)
    concave = not args.nonconcave
    sup = supinf_value(*a, scope=args.scope, concave=concave)
    inf = infsup_value(*a, scope=args.scope, concave=concave)
    out = {
        "constrained": constrained,
        "scope": args.scope,
        "utility": "U_c" if concave else "U",
        "supinf": {"value": sup.value, "gap": sup.gap, "method": sup.method,
                   "payoff": {"states": sup.payoff.to_list()} if sup.payoff is not None else None,
                   "mixture": sup.mixture.tolist() if sup.mixture is not None else None},
        "infsup": {"value": inf.value, "gap": inf.gap, "method": inf.method,
                   "mixture": inf.mixture.tolist() if inf.mixture is not None else None},
    }
    _write(dumps(out), args.output)
    return OK


def cmd_verify(args) -> int:
    if args.tolerance is not None and not args.tolerance > 0:
        raise InstanceError("--tolerance must be positive")
    eq_tol = args.tolerance
    if args.ensemble is not None:
        rep = diagram.ensemble_verify(
            args.seed, args.ensemble, eq_tol=eq_tol,
            variants=(True,) if args.constrained else (False, True),
        )
        print(rep.summary())
        if args.output:
            Path(args.output).write_text(dumps(rep.to_dict()))
        return VIOLATED if rep.violations else OK
    if args.input is None:
        raise InstanceError("verify needs an instance file or --ensemble N")
    inst = load_instance(args.input)
    rep = diagram.evaluate_diagram(inst, True if args.constrained else None, eq_tol)
    print(rep.summary())
    if args.output:
        Path(args.output).write_text(dumps(rep.to_dict()))
    return VIOLATED if rep.violations else OK


def cmd_generate(args) -> int:
    if args.states < 1 or args.extremes < 1 or args.kinks < 0:
        raise InstanceError("--states and --extremes must be >= 1, --kinks >= 0")
    if args.oracle_safe and (args.states > ORACLE_STATES or args.extremes > ORACLE_EXTREMES):
        raise InstanceError(
            f"--oracle-safe allows at most {ORACLE_STATES} states and {ORACLE_EXTREMES} extremes"
        )
    inst = generate_instance(args.seed, states=args.states, extremes=args.extremes, kinks=args.kinks)
    _write(dumps(inst.to_dict()), args.output)
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustmax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("concavify", help="concave envelope and (x, U, Uc) samples")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="envelope JSON (default stdout)")
    p.add_argument("--csv", help="CSV of samples with header x,U,Uc")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--x-max", type=float, default=None)
    p.set_defaults(func=cmd_concavify)

    p = sub.add_parser("improve", help="randomized improvement of a payoff")
    p.add_argument("input")
    p.add_argument("payoff")
    p.add_argument("--density", type=int, default=0, help="index of the extreme density")
    p.add_argument("--conditional", action="store_true", help="cap by W and work per W-group")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_improve)

    p = sub.add_parser("solve", help="sup-inf and inf-sup values")
    p.add_argument("input")
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--scope", choices=("Q", "Qe"), default="Q")
    p.add_argument("--nonconcave", action="store_true", help="use U instead of its envelope")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="evaluate the minimax diagram")
    p.add_argument("input", nargs="?")
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--ensemble", type=int, default=None, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("-o", "--output", help="machine-readable JSON report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("generate", help="seeded random instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--states", type=int, default=3)
    p.add_argument("--extremes", type=int, default=2)
    p.add_argument("--kinks", type=int, default=2)
    p.add_argument("--oracle-safe", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return BAD_INPUT if exc.code else OK
    try:
        return args.func(args)
    except NonEquivalentDensityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NON_EQUIVALENT
    except (InstanceError, DomainError, InstanceTooLarge, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
