"""Finite scenario spaces, measure families, W-conditioning and quantile couplings.

Every state carries an implicit independent uniform coordinate on (0, 1), so
each state can be split into arbitrary fractions. This is what makes the
finite space (and every conditional law given W) atomless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, NonEquivalentDensityError

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScenarioSpace:
    p: np.ndarray
    w: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or len(p) == 0:
            raise DomainError("p must be a nonempty vector")
        if np.any(p <= 0):
            raise DomainError("every state needs positive probability")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise DomainError(f"probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "p", p)
        if self.w is not None:
            w = np.asarray(self.w, dtype=float)
            if w.shape != p.shape:
                raise DomainError("w must have one entry per state")
            if np.any(w <= 0):
                raise DomainError("W must be positive")
            object.__setattr__(self, "w", w)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(p):
                raise DomainError("one label per state")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.p)

    def with_bound(self, w) -> "ScenarioSpace":
        return ScenarioSpace(self.p, w, self.labels)


@dataclass(frozen=True, eq=False)
class Density:
    """Radon-Nikodym density dQ/dP as per-state values."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1:
            raise DomainError("density must be a vector")
        if np.any(z < 0):
            raise DomainError("density values must be nonnegative")
        object.__setattr__(self, "z", z)

    @property
    def equivalent(self) -> bool:
        return bool(np.all(self.z > 0))

    def mass(self, space: ScenarioSpace) -> float:
        return float(space.p @ self.z)

    def check(self, space: ScenarioSpace) -> None:
        if len(self.z) != space.n:
            raise DomainError(f"density has {len(self.z)} entries for {space.n} states")
        if abs(self.mass(space) - 1.0) > MASS_TOL:
            raise DomainError(f"density integrates to {self.mass(space)}, not 1")


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """Convex hull of finitely many extreme densities."""

    extremes: tuple[Density, ...]

    def __post_init__(self):
        ext = tuple(e if isinstance(e, Density) else Density(e) for e in self.extremes)
        object.__setattr__(self, "extremes", ext)

    def __len__(self):
        return len(self.extremes)

    @property
    def Z(self) -> np.ndarray:
        """Extremes stacked as rows."""
        return np.vstack([e.z for e in self.extremes])

    def mixture(self, weights) -> Density:
        weights = np.asarray(weights, dtype=float)
        return Density(weights @ self.Z)

    @property
    def equivalent_indices(self) -> list[int]:
        return [j for j, e in enumerate(self.extremes) if e.equivalent]

    def anchor(self) -> int:
        """Index of the designated equivalent extreme used for epsilon-mixing."""
        idx = self.equivalent_indices
        if not idx:
            raise DomainError("family has no equivalent extreme")
        return idx[0]

    def epsilon_mixed(self, eps: float) -> "MeasureFamily":
        """Replace each non-equivalent extreme z by (1-eps) z + eps z_anchor."""
        anchor = self.extremes[self.anchor()].z
        out = []
        for e in self.extremes:
            out.append(e if e.equivalent else Density((1 - eps) * e.z + eps * anchor))
        return MeasureFamily(tuple(out))


@dataclass(frozen=True, eq=False)
class PricingMeasure:
    """Pricing measure Q^e through its density psi = dQ^e/dP."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        if np.any(psi <= 0):
            raise DomainError("pricing density must be strictly positive")
        object.__setattr__(self, "psi", psi)

    def check(self, space: ScenarioSpace) -> None:
        if len(self.psi) != space.n:
            raise DomainError("psi must have one entry per state")
        if abs(float(space.p @ self.psi) - 1.0) > MASS_TOL:
            raise DomainError("pricing density does not integrate to 1")

    def phi(self, density: Density) -> np.ndarray:
        """State-price density dQ^e/dQ; infinite where the density vanishes."""
        with np.errstate(divide="ignore"):
            return np.where(density.z > 0, self.psi / np.where(density.z > 0, density.z, 1.0), np.inf)


def expectation(space: ScenarioSpace, density: Density, values) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != space.p.shape or density.z.shape != space.p.shape:
        raise DomainError("length mismatch between space, density and values")
    return float(np.sum(space.p * density.z * values))


@dataclass(frozen=True)
class FamilyReport:
    n_extremes: int
    equivalent: tuple[bool, ...]
    masses: tuple[float, ...]
    convex: bool = True
    closed: bool = True

    @property
    def has_equivalent(self) -> bool:
        return any(self.equivalent)


def validate_family(space: ScenarioSpace, family: MeasureFamily) -> FamilyReport:
    """Check each extreme density; convexity and closedness hold by construction."""
    if len(family) == 0:
        raise DomainError("measure family is empty")
    for j, e in enumerate(family.extremes):
        try:
            e.check(space)
        except DomainError as exc:
            raise DomainError(f"extreme {j}: {exc}") from None
    report = FamilyReport(
        n_extremes=len(family),
        equivalent=tuple(e.equivalent for e in family.extremes),
        masses=tuple(e.mass(space) for e in family.extremes),
    )
    if not report.has_equivalent:
        raise DomainError("family contains no measure equivalent to P")
    return report


@dataclass(frozen=True)
class Group:
    v: float
    states: tuple[int, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True)
class ConditionalLaw:
    groups: tuple[Group, ...]

    def group_of(self, state: int) -> Group:
        for g in self.groups:
            if state in g.states:
                return g
        raise KeyError(state)


def group_by_W(space: ScenarioSpace) -> ConditionalLaw:
    """Partition states by exact value of W, with P-conditional weights."""
    if space.w is None:
        raise DomainError("space has no W bound")
    groups = []
    for v in sorted(set(space.w.tolist())):
        states = tuple(int(i) for i in np.flatnonzero(space.w == v))
        mass = space.p[list(states)].sum()
        groups.append(Group(float(v), states, tuple(float(space.p[i] / mass) for i in states)))
    return ConditionalLaw(tuple(groups))


def conditional_under(law: ConditionalLaw, density: Density, pricing: PricingMeasure | None = None) -> ConditionalLaw:
    """Reweight each group to the conditional law of Q given W.

    Within a group the new weight of state i is proportional to (current
    weight) * z_i, which for P-conditional weights is p_i z_i normalized.
    ``pricing`` is accepted for symmetry with the construction that builds
    phi next to this law and is not needed for the weights themselves.
    """
    z = density.z
    groups = []
    for g in law.groups:
        raw = np.array([wt * z[i] for i, wt in zip(g.states, g.weights)])
        if raw.sum() <= 0:
            raise NonEquivalentDensityError(f"density vanishes on the whole group W={g.v}")
        groups.append(Group(g.v, g.states, tuple(float(r) for r in raw / raw.sum())))
    return ConditionalLaw(tuple(groups))


@dataclass(frozen=True)
class QuantileCoupling:
    """Assignment of states to sub-intervals of [0, 1) sorted by phi.

    ``order[k]`` is the state owning ``[lower[k], upper[k])`` and ``q`` equals
    ``levels[k]`` there. Arithmetic follows the input number type, so
    ``Fraction`` inputs give exact intervals.
    """

    order: tuple[int, ...]
    lower: tuple
    upper: tuple
    levels: tuple

    def interval(self, state: int):
        k = self.order.index(state)
        return self.lower[k], self.upper[k]

    def q(self, t):
        if not 0 <= t < 1:
            raise DomainError("q is defined on [0, 1)")
        for k in range(len(self.order)):
            if t < self.upper[k]:
                return self.levels[k]
        return self.levels[-1]

    def zeta(self, state: int, u):
        """Uniform coordinate of a point of ``state`` with auxiliary uniform ``u``."""
        lo, hi = self.interval(state)
        return lo + u * (hi - lo)

    def cdf(self, t, weights) -> object:
        """Mass of {zeta < t} under the coupled law, computed from state weights."""
        total = 0 * t
        for k, s in enumerate(self.order):
            lo, hi = self.lower[k], self.upper[k]
            if t >= hi:
                total += weights[s]
            elif t > lo:
                total += weights[s] * (t - lo) / (hi - lo)
        return total


def quantile_coupling(weights: Sequence, phi: Sequence) -> QuantileCoupling:
    """Sort states by ``phi`` (ties by index) and stack their weights on [0, 1)."""
    if len(weights) != len(phi) or len(weights) == 0:
        raise DomainError("weights and phi must be nonempty and of equal length")
    if any(w <= 0 for w in weights):
        raise DomainError("coupling weights must be positive")
    exact = all(isinstance(w, (int, Fraction)) for w in weights)
    total = sum(weights)
    if exact:
        if total != 1:
            raise DomainError(f"weights sum to {total}, not 1")
    elif abs(total - 1) > 1e-9:
        raise DomainError(f"weights sum to {total}, not 1")
    order = tuple(sorted(range(len(phi)), key=lambda i: (phi[i], i)))
    lower, upper = [], []
    acc = Fraction(0) if exact else 0.0
    for k, s in enumerate(order):
        lower.append(acc)
        acc = acc + weights[s]
        upper.append(acc)
    # absorb rounding so the last interval ends exactly at 1
    upper[-1] = Fraction(1) if exact else 1.0
    return QuantileCoupling(order, tuple(lower), tuple(upper), tuple(phi[s] for s in order))
