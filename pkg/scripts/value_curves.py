"""Robust value as a function of initial wealth, for U_c and for randomized U.

Writes a CSV ``x,supinf_Uc,infsup_Uc,supinf_U,deterministic_U`` for one
generated instance; the last column is the best deterministic payoff on the
knot grid, which can fall strictly below the randomized value.
"""

import argparse
import csv
import sys

import numpy as np

from robustmax.errors import InstanceTooLarge
from robustmax.instance import generate_instance
from robustmax.payoff import BudgetSpec
from robustmax.solve import build_objective, deterministic_grid, infsup_value, supinf_value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--states", type=int, default=3)
    ap.add_argument("--extremes", type=int, default=2)
    ap.add_argument("--points", type=int, default=25)
    ap.add_argument("--constrained", action="store_true")
    args = ap.parse_args()
    inst = generate_instance(args.seed, args.states, args.extremes, kinks=2)
    obj = build_objective(inst.space, inst.pricing, inst.curve, args.constrained)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["x", "supinf_Uc", "infsup_Uc", "supinf_U", "deterministic_U"])
    top = 1.5 * float(np.sum(inst.space.p * inst.pricing.psi * inst.space.w))
    for x in np.linspace(top / args.points, top, args.points):
        b = BudgetSpec(float(x), args.constrained)
        a = (inst.space, inst.family, inst.pricing, inst.curve, b)
        try:
            det = deterministic_grid(obj, inst.family.Z, float(x))[0]
        except InstanceTooLarge:
            det = float("nan")
        writer.writerow([f"{x:.6g}", supinf_value(*a).value, infsup_value(*a).value,
                         supinf_value(*a, concave=False).value, det])


if __name__ == "__main__":
    main()
