"""Payoff improvement by two-point randomization on envelope gap endpoints.

Given a payoff X and an equivalent measure Q, every payoff atom that sits
strictly inside a gap of the (capped) concave envelope is replaced by the two
gap endpoints a < b. Within a class of atoms sharing the same W-group and gap,
the total mass sent to ``a`` equals the Q-expectation of the mixing weights,
which keeps E_Q[U_c] unchanged and makes U and U_c agree on the result. Mass
for the high endpoint ``b`` goes to the states with the lowest state-price
density phi = dQ^e/dQ, so the Q^e-cost can only go down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonEquivalentDensityError
from .payoff import BudgetSpec, RandomizedPayoff, cost, expected_utility, is_feasible
from .space import (
    ConditionalLaw,
    Density,
    Group,
    MeasureFamily,
    PricingMeasure,
    ScenarioSpace,
    conditional_under,
    group_by_W,
    quantile_coupling,
)
from .utility import UtilityCurve, gap_interval

SNAP = 1e-14


@dataclass(frozen=True)
class Slot:
    state: int
    atom: int
    value: float
    weight: float
    v: float
    a: float
    b: float
    lam: float


@dataclass(frozen=True)
class SigmaSplit:
    sigma: float
    boundary: int | None
    fraction: float
    below: tuple[float, ...]


def sigma_threshold(weights, lambdas, high_below: bool = True) -> SigmaSplit:
    """Threshold on the coupled uniform scale of one class.

    ``weights`` are slot masses in coupling order (increasing phi). The
    portion of the scale below ``sigma`` receives the high endpoint when
    ``high_below`` (the cost-reducing orientation) and the low endpoint
    otherwise. ``below[k]`` is the fraction of slot k under the threshold;
    at most one slot is split.
    """
    w = np.asarray(weights, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if len(w) == 0:
        raise DomainError("empty class")
    if np.any(w <= 0) or np.any((lam < 0) | (lam > 1)):
        raise DomainError("weights must be positive and lambdas in [0, 1]")
    total = w.sum()
    lam_mean = float(w @ lam) / total
    sigma = 1.0 - lam_mean if high_below else lam_mean
    target = sigma * total
    cum = np.concatenate([[0.0], np.cumsum(w)])
    below = np.clip((target - cum[:-1]) / w, 0.0, 1.0)
    below[below < SNAP] = 0.0
    below[below > 1 - SNAP] = 1.0
    split = [k for k in range(len(w)) if 0.0 < below[k] < 1.0]
    boundary = split[0] if split else None
    return SigmaSplit(sigma, boundary, float(below[boundary]) if split else 0.0, tuple(float(b) for b in below))


@dataclass
class ClassPlan:
    v: float
    a: float
    b: float
    slots: tuple[Slot, ...]
    masses: tuple[float, ...]
    phi: tuple[float, ...]
    lambda_mean: float
    split: SigmaSplit
    a_mass: float
    balance_residual: float
    balance_samples: tuple[tuple[float, float], ...]

    @property
    def sigma(self) -> float:
        return self.split.sigma


@dataclass
class ImprovementPlan:
    conditional: bool
    gap_slots: tuple[Slot, ...]
    phi: np.ndarray
    classes: tuple[ClassPlan, ...]
    utility_U_star: float = math.nan
    utility_Uc_star: float = math.nan
    utility_Uc_X: float = math.nan
    utility_U_X: float = math.nan
    cost_before: float = math.nan
    cost_after: float = math.nan
    cost_reversed: float = math.nan
    within_bound: bool = True

    @property
    def empty(self) -> bool:
        return not self.gap_slots

    @property
    def chain_residual(self) -> float:
        u = (self.utility_U_star, self.utility_Uc_star, self.utility_Uc_X)
        return max(u) - min(u)

    def to_dict(self) -> dict:
        return {
            "conditional": self.conditional,
            "gap_slots": [
                {"state": s.state, "atom": s.atom, "value": s.value, "weight": s.weight,
                 "v": _json_float(s.v), "a": s.a, "b": s.b, "lambda": s.lam}
                for s in self.gap_slots
            ],
            "phi": self.phi.tolist(),
            "classes": [
                {
                    "v": _json_float(c.v), "a": c.a, "b": c.b,
                    "states": [s.state for s in c.slots],
                    "masses": list(c.masses),
                    "lambda_mean": c.lambda_mean,
                    "sigma": c.sigma,
                    "boundary_slot": c.split.boundary,
                    "boundary_fraction": c.split.fraction,
                    "balance_residual": c.balance_residual,
                    "balance_samples": [list(t) for t in c.balance_samples],
                }
                for c in self.classes
            ],
            "utility": {
                "U(X*)": self.utility_U_star,
                "Uc(X*)": self.utility_Uc_star,
                "Uc(X)": self.utility_Uc_X,
                "U(X)": self.utility_U_X,
            },
            "cost": {"before": self.cost_before, "after": self.cost_after, "reversed": self.cost_reversed},
            "within_bound": self.within_bound,
        }


def _json_float(v: float):
    return None if math.isinf(v) else v


def _groups(space: ScenarioSpace, density: Density, conditional: bool, on_support: bool) -> list[Group]:
    z = density.z
    if conditional:
        law = group_by_W(space)
    else:
        law = ConditionalLaw((Group(math.inf, tuple(range(space.n)), tuple(space.p.tolist())),))
    if on_support:
        law = ConditionalLaw(tuple(
            Group(g.v, tuple(s for s in g.states if z[s] > 0), tuple(wt for s, wt in zip(g.states, g.weights) if z[s] > 0))
            for g in law.groups
            if any(z[s] > 0 for s in g.states)
        ))
    return list(conditional_under(law, density).groups)


def _apply(payoff: RandomizedPayoff, classes: list[ClassPlan], fractions: list[tuple[float, ...]], high_below: bool):
    atoms = [list(s) for s in payoff.atoms]
    replaced: dict[tuple[int, int], list] = {}
    for cp, below in zip(classes, fractions):
        hi, lo = (cp.b, cp.a) if high_below else (cp.a, cp.b)
        for slot, f in zip(cp.slots, below):
            replaced[(slot.state, slot.atom)] = [(hi, slot.weight * f), (lo, slot.weight * (1.0 - f))]
    out = []
    for i, s in enumerate(atoms):
        new = []
        for j, (val, wt) in enumerate(s):
            new.extend(replaced.get((i, j), [(val, wt)]))
        out.append(tuple(new))
    return RandomizedPayoff(tuple(out))


def improve(
    payoff: RandomizedPayoff,
    space: ScenarioSpace,
    density: Density,
    pricing: PricingMeasure,
    curve: UtilityCurve,
    conditional: bool = False,
    on_support: bool = False,
) -> tuple[RandomizedPayoff, ImprovementPlan]:
    """Improve ``payoff`` under ``density``; returns the new payoff and the audit plan.

    With ``conditional`` the construction runs separately in each group of
    states sharing a W value, with the utility capped at that value. With
    ``on_support`` states where the density vanishes are left untouched
    instead of raising.
    """
    if not density.equivalent and not on_support:
        raise NonEquivalentDensityError("improvement needs a density with all entries positive")
    if payoff.n != space.n:
        raise DomainError("payoff and space sizes differ")
    phi = pricing.phi(density)
    slots: list[Slot] = []
    classes: list[ClassPlan] = []
    for group in _groups(space, density, conditional, on_support):
        weight_of = dict(zip(group.states, group.weights))
        buckets: dict[tuple[float, float], list[Slot]] = {}
        for i in group.states:
            for j, (val, wt) in enumerate(payoff.atoms[i]):
                if val < 0 or val > group.v:
                    raise DomainError(f"payoff value {val} in state {i} outside [0, {group.v}]")
                g = gap_interval(curve, group.v, val)
                if g.degenerate:
                    continue
                slot = Slot(i, j, val, wt, group.v, g.a, g.b, g.lam)
                slots.append(slot)
                buckets.setdefault((g.a, g.b), []).append(slot)
        for (a, b), members in sorted(buckets.items()):
            masses = [weight_of[s.state] * s.weight for s in members]
            total = sum(masses)
            coupling = quantile_coupling([m / total for m in masses], [phi[s.state] for s in members])
            ordered = [members[k] for k in coupling.order]
            om = np.array([masses[k] for k in coupling.order])
            lams = np.array([s.lam for s in ordered])
            split = sigma_threshold(om, lams, high_below=True)
            below = np.array(split.below)
            a_mass = float(om @ (1.0 - below))
            target = float(om @ lams)
            cum = np.concatenate([[0.0], np.cumsum(om)]) / total
            samples = tuple((float(s), float(s - split.sigma)) for s in cum)
            classes.append(ClassPlan(
                v=group.v, a=a, b=b, slots=tuple(ordered), masses=tuple(om.tolist()),
                phi=tuple(float(phi[s.state]) for s in ordered),
                lambda_mean=target / total, split=split, a_mass=a_mass,
                balance_residual=abs(a_mass - target) / total,
                balance_samples=samples,
            ))
    plan = ImprovementPlan(conditional, tuple(slots), phi, tuple(classes))
    if not classes:
        improved = payoff
        reversed_payoff = payoff
    else:
        improved = _apply(payoff, classes, [c.split.below for c in classes], high_below=True)
        rev = [sigma_threshold(c.masses, [s.lam for s in c.slots], high_below=False).below for c in classes]
        reversed_payoff = _apply(payoff, classes, rev, high_below=False)
    plan.utility_U_star = expected_utility(improved, space, density, curve, conditional)
    plan.utility_Uc_star = expected_utility(improved, space, density, curve, conditional, concave=True)
    plan.utility_Uc_X = expected_utility(payoff, space, density, curve, conditional, concave=True)
    plan.utility_U_X = expected_utility(payoff, space, density, curve, conditional)
    plan.cost_before = cost(payoff, space, pricing)
    plan.cost_after = cost(improved, space, pricing)
    plan.cost_reversed = cost(reversed_payoff, space, pricing)
    if conditional:
        plan.within_bound = bool(np.all(improved.max_values() <= space.w))
    return improved, plan


def reversed_orientation(payoff, space, density, pricing, curve, conditional=False):
    """Same construction with the low endpoint on the low-phi states; for comparison only."""
    _, plan = improve(payoff, space, density, pricing, curve, conditional)
    rev = [sigma_threshold(c.masses, [s.lam for s in c.slots], high_below=False).below for c in plan.classes]
    if not plan.classes:
        return payoff
    return _apply(payoff, list(plan.classes), rev, high_below=False)


@dataclass
class SupremumCheck:
    rows: list[dict] = field(default_factory=list)
    max_chain_gap: float = 0.0
    max_sup_gap: float = 0.0
    max_cost_increase: float = -math.inf

    @property
    def ok(self) -> bool:
        return self.max_chain_gap < 1e-8 and self.max_sup_gap < 1e-8 and self.max_cost_increase <= 1e-10


def improve_supremum_check(
    space: ScenarioSpace,
    family: MeasureFamily,
    pricing: PricingMeasure,
    curve: UtilityCurve,
    budget: BudgetSpec,
    sample_payoffs=(),
) -> SupremumCheck:
    """Evidence that sup E_Q[U] = sup E_Q[U_c] over the budget set, per equivalent extreme.

    For each sampled feasible X the improved payoff must reproduce E_Q[U_c(X)]
    under U; the single-measure U_c optimizer, once improved, must reach the
    U_c supremum under U.
    """
    from .solve import maximize_concave_single

    report = SupremumCheck()
    conditional = budget.constrained
    for j in family.equivalent_indices:
        q = family.extremes[j]
        best = maximize_concave_single(space, q, pricing, curve, budget)
        star, _ = improve(best.payoff, space, q, pricing, curve, conditional)
        sup_u = expected_utility(star, space, q, curve, conditional)
        row = {"extreme": j, "sup_Uc": best.value, "sup_U": sup_u, "samples": []}
        report.max_sup_gap = max(report.max_sup_gap, abs(best.value - sup_u))
        for X in sample_payoffs:
            if not is_feasible(X, space, pricing, budget):
                continue
            X_star, plan = improve(X, space, q, pricing, curve, conditional)
            report.max_chain_gap = max(report.max_chain_gap, plan.chain_residual)
            report.max_cost_increase = max(report.max_cost_increase, plan.cost_after - plan.cost_before)
            if plan.utility_U_star > best.value + 1e-9:
                report.max_sup_gap = max(report.max_sup_gap, plan.utility_U_star - best.value)
            row["samples"].append((plan.utility_Uc_X, plan.utility_U_star))
        report.rows.append(row)
    return report


def split_in_place(payoff: RandomizedPayoff, space: ScenarioSpace, curve: UtilityCurve,
                   conditional: bool = False) -> RandomizedPayoff:
    """Replace every atom inside an envelope gap by its endpoints, within its own state.

    The mean of each state is kept, so the cost is unchanged under any pricing,
    and the per-state U-average equals U_c of the old value. No measure enters,
    which makes the result simultaneously good for every density of a family.
    """
    if conditional and space.w is None:
        raise DomainError("conditional split needs a W bound")
    states = []
    for i, atoms in enumerate(payoff.atoms):
        v = float(space.w[i]) if conditional else math.inf
        out = []
        for value, weight in atoms:
            g = gap_interval(curve, v, min(value, v))
            if g.degenerate:
                out.append((value, weight))
            else:
                out.extend([(g.a, weight * g.lam), (g.b, weight * (1 - g.lam))])
        states.append(tuple(out))
    return RandomizedPayoff(tuple(states))
