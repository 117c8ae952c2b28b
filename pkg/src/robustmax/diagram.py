"""The eight-quantity minimax diagram and its relations (1*)-(8*).

Quantities (scope Q is the whole family, Qe its equivalent part):

    supinf_Qe_Uc  =(1)=  supinf_Q_Uc  =(2)=  infsup_Q_Uc
         |<=(4)                                  |=(3)
    supinf_Qe_U                              infsup_Qe_Uc
         |=(6)                                   |=(5)
    supinf_Q_U   <=(7)=  infsup_Q_U   <=(8)=  infsup_Qe_U

In the constrained variant every utility is capped at W(state) and payoffs
are bounded by W.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance, generate_instance
from .payoff import BudgetSpec, RandomizedPayoff, is_nontrivial, worst_case_utility
from .solve import infsup_value, supinf_value

EQ_TOL = 1e-7
INEQ_TOL = 1e-9

RELATIONS = (
    ("1", "eq", "supinf_Qe_Uc", "supinf_Q_Uc"),
    ("2", "eq", "supinf_Q_Uc", "infsup_Q_Uc"),
    ("3", "eq", "infsup_Q_Uc", "infsup_Qe_Uc"),
    ("4", "le", "supinf_Qe_U", "supinf_Qe_Uc"),
    ("5", "eq", "infsup_Qe_Uc", "infsup_Qe_U"),
    ("6", "eq", "supinf_Qe_U", "supinf_Q_U"),
    ("7", "le", "supinf_Q_U", "infsup_Q_U"),
    ("8", "le", "infsup_Q_U", "infsup_Qe_U"),
)


def default_eq_tol() -> float:
    raw = os.environ.get("ROBUSTMAX_TOLERANCE")
    return float(raw) if raw else EQ_TOL


@dataclass
class Quantity:
    name: str
    value: float
    gap: float
    method: str
    details: dict = field(default_factory=dict)


@dataclass
class Relation:
    star: str
    kind: str
    lhs: str
    rhs: str
    slack: float
    allowance: float
    verdict: str


def judge(kind: str, lhs: Quantity, rhs: Quantity, eq_tol: float, ineq_tol: float) -> tuple[float, float, str]:
    """Signed slack (rhs - lhs), allowance, and verdict for one relation."""
    slack = rhs.value - lhs.value
    gaps = lhs.gap + rhs.gap
    if not (math.isfinite(lhs.value) and math.isfinite(rhs.value)):
        return slack, math.nan, "inconclusive"
    if kind == "eq":
        allowance = eq_tol + gaps
        return slack, allowance, "holds" if abs(slack) <= allowance else "violated"
    allowance = ineq_tol + gaps
    return slack, allowance, "holds" if slack >= -allowance else "violated"


@dataclass
class DiagramReport:
    constrained: bool
    x: float
    regime: str
    quantities: dict[str, Quantity] = field(default_factory=dict)
    relations: list[Relation] = field(default_factory=list)
    eq_tol: float = EQ_TOL
    ineq_tol: float = INEQ_TOL
    trivial_value: float | None = None
    seconds: float = 0.0

    @property
    def violations(self) -> list[Relation]:
        return [r for r in self.relations if r.verdict == "violated"]

    def recompute(self) -> list[str]:
        return [
            judge(k, self.quantities[l], self.quantities[r], self.eq_tol, self.ineq_tol)[2]
            for _, k, l, r in RELATIONS
        ]

    def to_dict(self) -> dict:
        return {
            "constrained": self.constrained,
            "x": self.x,
            "regime": self.regime,
            "trivial_value": self.trivial_value,
            "tolerances": {"equality": self.eq_tol, "inequality": self.ineq_tol},
            "quantities": {
                k: {"value": q.value, "gap": q.gap, "method": q.method} for k, q in self.quantities.items()
            },
            "relations": [
                {"star": r.star, "kind": r.kind, "lhs": r.lhs, "rhs": r.rhs,
                 "slack": r.slack, "allowance": r.allowance, "verdict": r.verdict}
                for r in self.relations
            ],
        }

    def summary(self) -> str:
        head = f"diagram ({'constrained' if self.constrained else 'unconstrained'}, x={self.x:.6g})"
        if self.regime == "trivial":
            return f"{head}: trivial regime E_Qe[W] <= x, X* = W, value {self.trivial_value:.10g}"
        lines = [head]
        for name, q in self.quantities.items():
            lines.append(f"  {name:14s} {q.value:.10f}  gap {q.gap:.2e}  [{q.method}]")
        for r in self.relations:
            sym = "=" if r.kind == "eq" else "<="
            lines.append(
                f"  ({r.star}*) {r.lhs} {sym} {r.rhs}: {r.verdict}  slack {r.slack:+.3e}  allowance {r.allowance:.2e}"
            )
        return "\n".join(lines)


def evaluate_diagram(instance: Instance, constrained: bool | None = None, eq_tol: float | None = None) -> DiagramReport:
    start = time.perf_counter()
    constrained = instance.budget.constrained if constrained is None else constrained
    eq_tol = default_eq_tol() if eq_tol is None else eq_tol
    budget = BudgetSpec(instance.budget.x, constrained)
    args = (instance.space, instance.family, instance.pricing, instance.curve, budget)
    report = DiagramReport(constrained, budget.x, "nontrivial", eq_tol=eq_tol)
    if constrained and not is_nontrivial(instance.space, instance.pricing, budget.x):
        W = RandomizedPayoff.deterministic(instance.space.w)
        report.regime = "trivial"
        report.trivial_value, _ = worst_case_utility(W, instance.space, instance.family, instance.curve, True)
        report.seconds = time.perf_counter() - start
        return report

    def put(name, res):
        report.quantities[name] = Quantity(name, res.value, res.gap, res.method, res.details)

    put("supinf_Qe_Uc", supinf_value(*args, scope="Qe", concave=True))
    put("supinf_Q_Uc", supinf_value(*args, scope="Q", concave=True))
    put("infsup_Q_Uc", infsup_value(*args, scope="Q", concave=True))
    put("infsup_Qe_Uc", infsup_value(*args, scope="Qe", concave=True))
    put("infsup_Qe_U", infsup_value(*args, scope="Qe", concave=False))
    put("infsup_Q_U", infsup_value(*args, scope="Q", concave=False))
    put("supinf_Q_U", supinf_value(*args, scope="Q", concave=False))
    put("supinf_Qe_U", supinf_value(*args, scope="Qe", concave=False))
    for star, kind, lhs, rhs in RELATIONS:
        slack, allowance, verdict = judge(kind, report.quantities[lhs], report.quantities[rhs], eq_tol, INEQ_TOL)
        report.relations.append(Relation(star, kind, lhs, rhs, slack, allowance, verdict))
    report.seconds = time.perf_counter() - start
    return report


@dataclass
class EnsembleReport:
    seed: int
    count: int
    diagrams: int = 0
    trivial: int = 0
    violations: int = 0
    violated: list[tuple[int, bool, str]] = field(default_factory=list)
    max_abs_eq_slack: dict[str, float] = field(default_factory=dict)
    min_ineq_slack: dict[str, float] = field(default_factory=dict)
    seconds: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "count": self.count,
            "diagrams": self.diagrams,
            "trivial": self.trivial,
            "violations": self.violations,
            "violated": [list(v) for v in self.violated],
            "max_abs_eq_slack": self.max_abs_eq_slack,
            "min_ineq_slack": self.min_ineq_slack,
            "runtime": {
                "total": float(np.sum(self.seconds)) if self.seconds else 0.0,
                "max": float(np.max(self.seconds)) if self.seconds else 0.0,
            },
        }

    def summary(self) -> str:
        lines = [
            f"ensemble seed={self.seed} count={self.count}: {self.diagrams} diagrams, "
            f"{self.trivial} trivial-regime, {self.violations} violated relations"
        ]
        for star in sorted(self.max_abs_eq_slack):
            lines.append(f"  ({star}*) max |slack| {self.max_abs_eq_slack[star]:.3e}")
        for star in sorted(self.min_ineq_slack):
            lines.append(f"  ({star}*) min slack {self.min_ineq_slack[star]:+.3e}")
        return "\n".join(lines)


def ensemble_instances(seed: int, count: int, max_states: int = 4, max_extremes: int = 4,
                       kinks: tuple[int, int] = (1, 3), trivial_rate: float = 0.1):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        child = int(rng.integers(0, 2**31 - 1))
        yield generate_instance(
            child,
            states=int(rng.integers(2, max_states + 1)),
            extremes=int(rng.integers(2, max_extremes + 1)),
            kinks=int(rng.integers(kinks[0], kinks[1] + 1)),
            trivial_rate=trivial_rate,
        )


def ensemble_verify(
    seed: int,
    count: int,
    max_states: int = 4,
    max_extremes: int = 4,
    kinks: tuple[int, int] = (1, 3),
    variants: tuple[bool, ...] = (False, True),
    eq_tol: float | None = None,
    trivial_rate: float = 0.1,
) -> EnsembleReport:
    """Evaluate the diagram on seeded random instances and aggregate slacks."""
    out = EnsembleReport(seed, count)
    for k, inst in enumerate(ensemble_instances(seed, count, max_states, max_extremes, kinks, trivial_rate)):
        for constrained in variants:
            rep = evaluate_diagram(inst, constrained, eq_tol)
            out.seconds.append(rep.seconds)
            if rep.regime == "trivial":
                out.trivial += 1
                continue
            out.diagrams += 1
            for r in rep.relations:
                if r.verdict == "violated":
                    out.violations += 1
                    out.violated.append((k, constrained, r.star))
                if r.kind == "eq":
                    out.max_abs_eq_slack[r.star] = max(out.max_abs_eq_slack.get(r.star, 0.0), abs(r.slack))
                else:
                    out.min_ineq_slack[r.star] = min(out.min_ineq_slack.get(r.star, math.inf), r.slack)
    return out
