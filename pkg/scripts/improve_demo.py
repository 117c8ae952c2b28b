"""Improve random feasible payoffs and tabulate utility and cost before/after.

Each row compares the implemented orientation (high endpoint on low state-price
density) with the reversed one.
"""

import argparse

import numpy as np

from robustmax.improve import improve
from robustmax.instance import generate_instance
from robustmax.payoff import RandomizedPayoff, cost


def random_payoff(rng, inst):
    x = rng.uniform(0, inst.space.w)
    scale = min(1.0, inst.budget.x / cost(RandomizedPayoff.deterministic(x), inst.space, inst.pricing))
    return RandomizedPayoff.deterministic(x * scale)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--conditional", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'E[U(X)]':>10} {'E[Uc(X)]':>10} {'E[U(X*)]':>10} {'cost':>8} {'cost*':>8} {'reversed':>9}")
    for _ in range(args.trials):
        inst = generate_instance(int(rng.integers(2**31)), states=4, extremes=1, kinks=3)
        X = random_payoff(rng, inst)
        _, plan = improve(X, inst.space, inst.family.extremes[0], inst.pricing, inst.curve, args.conditional)
        print(f"{plan.utility_U_X:10.5f} {plan.utility_Uc_X:10.5f} {plan.utility_U_star:10.5f} "
              f"{plan.cost_before:8.4f} {plan.cost_after:8.4f} {plan.cost_reversed:9.4f}")


if __name__ == "__main__":
    main()
