"""Instance files: parsing, emission and seeded generation.

An instance is a JSON object with sections ``utility``, ``space``,
``pricing``, ``family``, ``budget`` and an optional ``seed``. Numbers may be
written as JSON numbers or as strings holding decimals or fractions "a/b".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import CurveError, DomainError
from .payoff import BudgetSpec, RandomizedPayoff
from .space import Density, MeasureFamily, PricingMeasure, ScenarioSpace, validate_family
from .utility import UtilityCurve, random_curve


class InstanceError(ValueError):
    """Malformed instance or payoff file; the message names the location."""


@dataclass(eq=False)
class Instance:
    curve: UtilityCurve
    space: ScenarioSpace
    pricing: PricingMeasure
    family: MeasureFamily
    budget: BudgetSpec
    seed: int | None = None

    def to_dict(self) -> dict:
        space = {"p": self.space.p.tolist()}
        if self.space.w is not None:
            space["w"] = self.space.w.tolist()
        if self.space.labels is not None:
            space["labels"] = list(self.space.labels)
        out = {
            "utility": self.curve.to_dict(),
            "space": space,
            "pricing": {"psi": self.pricing.psi.tolist()},
            "family": [e.z.tolist() for e in self.family.extremes],
            "budget": {"x": self.budget.x, "constrained": self.budget.constrained},
        }
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def same_as(self, other: "Instance") -> bool:
        return self.to_dict() == other.to_dict()


def parse_number(raw, where: str) -> float:
    if isinstance(raw, bool):
        raise InstanceError(f"{where}: expected a number, got {raw!r}")
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        try:
            return float(Fraction(raw.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise InstanceError(f"{where}: expected a number or 'a/b', got {raw!r}")


def _numbers(raw, where: str) -> list[float]:
    if not isinstance(raw, list):
        raise InstanceError(f"{where}: expected a list")
    return [parse_number(v, f"{where}[{i}]") for i, v in enumerate(raw)]


def _section(data: dict, name: str):
    if name not in data:
        raise InstanceError(f"missing section '{name}'")
    return data[name]


def parse_curve(raw: dict, where: str = "utility") -> UtilityCurve:
    if not isinstance(raw, dict):
        raise InstanceError(f"{where}: expected an object")
    try:
        return UtilityCurve(
            _numbers(raw.get("knots"), f"{where}.knots"),
            _numbers(raw.get("values"), f"{where}.values"),
            _numbers(raw.get("slopes", []), f"{where}.slopes"),
            parse_number(raw.get("tail_slope", 0), f"{where}.tail_slope"),
        )
    except CurveError as exc:
        loc = f" at knot index {exc.index}" if exc.index is not None else ""
        raise InstanceError(f"{where}{loc}: {exc}") from None


def parse_instance(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise InstanceError("instance must be a JSON object")
    curve = parse_curve(_section(data, "utility"))
    sp = _section(data, "space")
    try:
        space = ScenarioSpace(
            _numbers(sp.get("p"), "space.p"),
            _numbers(sp["w"], "space.w") if sp.get("w") is not None else None,
            sp.get("labels"),
        )
        pricing = PricingMeasure(_numbers(_section(data, "pricing").get("psi"), "pricing.psi"))
        pricing.check(space)
        fam_raw = _section(data, "family")
        if not isinstance(fam_raw, list):
            raise InstanceError("family: expected a list of density arrays")
        family = MeasureFamily(tuple(Density(_numbers(z, f"family[{j}]")) for j, z in enumerate(fam_raw)))
        validate_family(space, family)
        b = _section(data, "budget")
        budget = BudgetSpec(parse_number(b.get("x"), "budget.x"), bool(b.get("constrained", False)))
        if budget.constrained and space.w is None:
            raise InstanceError("budget.constrained requires space.w")
    except DomainError as exc:
        raise InstanceError(str(exc)) from None
    seed = data.get("seed")
    return Instance(curve, space, pricing, family, budget, None if seed is None else int(seed))


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_instance(path) -> Instance:
    return parse_instance(load_json(path))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def parse_payoff(data, n: int) -> RandomizedPayoff:
    states = data.get("states") if isinstance(data, dict) else data
    if not isinstance(states, list) or len(states) != n:
        raise InstanceError(f"payoff: expected {n} states")
    atoms = []
    for i, s in enumerate(states):
        if isinstance(s, (int, float, str)):
            atoms.append(((parse_number(s, f"payoff[{i}]"), 1.0),))
            continue
        atoms.append(tuple(
            (parse_number(a[0], f"payoff[{i}][{j}].value"), parse_number(a[1], f"payoff[{i}][{j}].weight"))
            for j, a in enumerate(s)
        ))
    try:
        return RandomizedPayoff(tuple(atoms))
    except DomainError as exc:
        raise InstanceError(f"payoff: {exc}") from None


def _simplex_point(rng, n, zero_mask=None):
    v = rng.uniform(0.2, 1.0, size=n)
    if zero_mask is not None:
        v = np.where(zero_mask, 0.0, v)
    return v


def generate_instance(
    seed: int,
    states: int = 3,
    extremes: int = 2,
    kinks: int = 2,
    x_max: float = 4.0,
    max_knots: int = 6,
    trivial_rate: float = 0.0,
) -> Instance:
    """Random valid instance; a pure function of its arguments.

    The first extreme is equivalent to P; later extremes vanish on a random
    subset of states with probability 0.3. W takes values on a few levels so
    that several states can share a W-group.
    """
    rng = np.random.default_rng(seed)
    curve = random_curve(rng, kinks=kinks, x_max=x_max, max_knots=max_knots)
    p = rng.uniform(0.5, 1.5, size=states)
    p = p / p.sum()
    psi = rng.uniform(0.5, 1.5, size=states)
    psi = psi / float(p @ psi)
    zs = []
    for j in range(extremes):
        mask = None
        if j > 0 and states > 1 and rng.random() < 0.3:
            k = int(rng.integers(1, states))
            mask = np.zeros(states, dtype=bool)
            mask[rng.choice(states, size=k, replace=False)] = True
        z = _simplex_point(rng, states, mask)
        zs.append(z / float(p @ z))
    levels = np.round(rng.uniform(0.5, x_max, size=max(1, states - 1)), 3)
    w = rng.choice(levels, size=states)
    bound = float(np.sum(p * psi * w))
    if rng.random() < trivial_rate:
        x = bound * float(rng.uniform(1.0, 1.3))
    else:
        x = bound * float(rng.uniform(0.15, 0.9))
    return Instance(
        curve,
        ScenarioSpace(p, w),
        PricingMeasure(psi),
        MeasureFamily(tuple(Density(z) for z in zs)),
        BudgetSpec(round(x, 6) if round(x, 6) > 0 else x, False),
        seed,
    )
