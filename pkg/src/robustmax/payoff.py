"""Randomized final endowments, their costs and expected utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .space import Density, MeasureFamily, PricingMeasure, ScenarioSpace
from .utility import UtilityCurve, capped, capped_envelope

WEIGHT_TOL = 1e-12
COST_TOL = 1e-9

Atom = tuple[float, float]


def _normalize_state(atoms) -> tuple[Atom, ...]:
    merged: dict[float, float] = {}
    for value, weight in atoms:
        value, weight = float(value), float(weight)
        if weight < 0:
            raise DomainError(f"negative atom weight {weight}")
        if weight == 0:
            continue
        merged[value] = merged.get(value, 0.0) + weight
    return tuple(sorted(merged.items()))


@dataclass(frozen=True)
class RandomizedPayoff:
    """Per-state finite mixtures ``((value, weight), ...)``.

    The mixture in state i is realized by that state's auxiliary uniform
    coordinate. Atoms with equal values are merged and zero weights dropped.
    """

    atoms: tuple[tuple[Atom, ...], ...]

    def __post_init__(self):
        atoms = tuple(_normalize_state(s) for s in self.atoms)
        for i, s in enumerate(atoms):
            if not s:
                raise DomainError(f"state {i} has no atoms")
            if any(v < 0 for v, _ in s):
                raise DomainError(f"state {i} has a negative payoff value")
            total = sum(w for _, w in s)
            if abs(total - 1.0) > WEIGHT_TOL:
                raise DomainError(f"state {i} atom weights sum to {total}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def deterministic(cls, x: Sequence[float]) -> "RandomizedPayoff":
        return cls(tuple(((float(v), 1.0),) for v in x))

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def is_deterministic(self) -> bool:
        return all(len(s) == 1 for s in self.atoms)

    def means(self) -> np.ndarray:
        return np.array([sum(v * w for v, w in s) for s in self.atoms])

    def max_values(self) -> np.ndarray:
        return np.array([max(v for v, _ in s) for s in self.atoms])

    def min_values(self) -> np.ndarray:
        return np.array([min(v for v, _ in s) for s in self.atoms])

    def close_to(self, other: "RandomizedPayoff", tol: float = 1e-12) -> bool:
        if self.n != other.n:
            return False
        for s, t in zip(self.atoms, other.atoms):
            if len(s) != len(t):
                return False
            for (v1, w1), (v2, w2) in zip(s, t):
                if abs(v1 - v2) > tol or abs(w1 - w2) > tol:
                    return False
        return True

    def to_list(self) -> list:
        return [[[v, w] for v, w in s] for s in self.atoms]


@dataclass(frozen=True)
class BudgetSpec:
    x: float
    constrained: bool = False

    def __post_init__(self):
        if not self.x > 0:
            raise DomainError(f"initial wealth must be positive, got {self.x}")


def bound_cost(space: ScenarioSpace, pricing: PricingMeasure) -> float:
    """E_{Q^e}[W]."""
    if space.w is None:
        raise DomainError("space has no W bound")
    return float(np.sum(space.p * pricing.psi * space.w))


def is_nontrivial(space: ScenarioSpace, pricing: PricingMeasure, x: float) -> bool:
    """Whether E_{Q^e}[W] > x; otherwise X = W is optimal by monotonicity."""
    return bound_cost(space, pricing) > x


def state_curves(curve: UtilityCurve, space: ScenarioSpace, cap_by_W: bool, concave: bool = False) -> list:
    """Per-state utility curves: U or U_c, capped at W(state) when requested.

    With ``concave`` the cap is applied before concavifying, i.e. the curve in
    state i is the envelope of ``U(. min W_i)``.
    """
    if cap_by_W and space.w is None:
        raise DomainError("cap_by_W needs a W bound on the space")
    out = []
    for i in range(space.n):
        v = float(space.w[i]) if cap_by_W else math.inf
        out.append(capped_envelope(curve, v) if concave else capped(curve, v))
    return out


def state_bounds(space: ScenarioSpace, constrained: bool) -> np.ndarray:
    if constrained:
        if space.w is None:
            raise DomainError("constrained problem needs W")
        return space.w.copy()
    return np.full(space.n, np.inf)


def cost(payoff: RandomizedPayoff, space: ScenarioSpace, pricing: PricingMeasure) -> float:
    return float(np.sum(space.p * pricing.psi * payoff.means()))


def state_utilities(payoff: RandomizedPayoff, curves: Sequence) -> np.ndarray:
    """Per-state mixture-averaged utility."""
    return np.array([sum(w * curves[i](v) for v, w in s) for i, s in enumerate(payoff.atoms)])


def expected_utility(
    payoff: RandomizedPayoff,
    space: ScenarioSpace,
    density: Density,
    curve: UtilityCurve,
    cap_by_W: bool = False,
    concave: bool = False,
) -> float:
    """E_Q[U^(W)(X)] with the per-state mixture averaged in."""
    curves = state_curves(curve, space, cap_by_W, concave)
    return float(np.sum(space.p * density.z * state_utilities(payoff, curves)))


@dataclass
class FeasibilityVerdict:
    feasible: bool
    cost: float
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.feasible


def is_feasible(
    payoff: RandomizedPayoff, space: ScenarioSpace, pricing: PricingMeasure, budget: BudgetSpec
) -> FeasibilityVerdict:
    violations = []
    if np.any(payoff.min_values() < 0):
        violations.append("negative payoff value")
    if budget.constrained:
        if space.w is None:
            violations.append("constrained budget but no W")
        else:
            over = np.flatnonzero(payoff.max_values() > space.w + COST_TOL)
            violations.extend(f"state {i} exceeds W" for i in over)
    c = cost(payoff, space, pricing)
    if c > budget.x + COST_TOL:
        violations.append(f"cost {c} exceeds budget {budget.x}")
    return FeasibilityVerdict(not violations, c, violations)


def worst_case_utility(
    payoff: RandomizedPayoff,
    space: ScenarioSpace,
    family: MeasureFamily,
    curve: UtilityCurve,
    cap_by_W: bool = False,
    concave: bool = False,
) -> tuple[float, int]:
    """Minimum expected utility over the family and the minimizing extreme.

    Expectation is linear in the density, so the infimum over the convex hull
    is attained at an extreme.
    """
    if len(family) == 0:
        raise DomainError("measure family is empty")
    curves = state_curves(curve, space, cap_by_W, concave)
    su = state_utilities(payoff, curves)
    vals = family.Z @ (space.p * su)
    j = int(np.argmin(vals))
    return float(vals[j]), j


def epsilon_infima(
    payoff: RandomizedPayoff,
    space: ScenarioSpace,
    family: MeasureFamily,
    curve: UtilityCurve,
    eps_values=(1e-2, 1e-4, 1e-6),
    cap_by_W: bool = False,
    concave: bool = False,
) -> list[float]:
    """Worst-case utility over the family with non-equivalent extremes pulled
    toward the anchor extreme by each ``eps``; every such family consists of
    equivalent measures and shrinks toward the full family as eps decreases."""
    return [worst_case_utility(payoff, space, family.epsilon_mixed(e), curve, cap_by_W, concave)[0] for e in eps_values]
