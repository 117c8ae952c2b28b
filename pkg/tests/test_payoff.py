import numpy as np
import pytest

from conftest import min_curve, step_curve
from robustmax.errors import DomainError
from robustmax.payoff import (
    BudgetSpec,
    RandomizedPayoff,
    bound_cost,
    cost,
    epsilon_infima,
    expected_utility,
    is_feasible,
    is_nontrivial,
    worst_case_utility,
)
from robustmax.space import Density, MeasureFamily, PricingMeasure, ScenarioSpace

half = ScenarioSpace([0.5, 0.5], [2.0, 2.0])
flat = PricingMeasure([1.0, 1.0])


def test_atoms_are_merged_and_sorted():
    X = RandomizedPayoff((((1.0, 0.25), (0.0, 0.5), (1.0, 0.25)),))
    assert X.atoms == (((0.0, 0.5), (1.0, 0.5)),)


@pytest.mark.parametrize("atoms", [(((1.0, 0.6),),), (((-1.0, 1.0),),), ((),)])
def test_invalid_payoffs(atoms):
    with pytest.raises(DomainError):
        RandomizedPayoff(atoms)


def test_cost_examples():
    assert cost(RandomizedPayoff.deterministic([0.7, 0.7]), half, PricingMeasure([0.8, 1.2])) == pytest.approx(0.7)
    X = RandomizedPayoff((((1.0, 0.5), (0.0, 0.5)), ((0.0, 1.0),)))
    assert cost(X, half, flat) == pytest.approx(0.25)
    assert cost(RandomizedPayoff.deterministic([0, 0]), half, flat) == 0.0


def test_expected_utility_examples():
    one = ScenarioSpace([1.0], [0.5])
    X = RandomizedPayoff((((1.0, 0.5), (0.0, 0.5)),))
    assert expected_utility(X, one, Density([1.0]), step_curve()) == pytest.approx(0.5)
    det = RandomizedPayoff.deterministic([0.3, 2.0])
    assert expected_utility(det, half, Density([1.0, 1.0]), min_curve()) == pytest.approx(0.65)
    # W = 0.5 sits below the jump: capped utility is the plateau 0
    assert expected_utility(X, one, Density([1.0]), step_curve(), cap_by_W=True) == 0.0
    assert expected_utility(X, one, Density([1.0]), step_curve(), cap_by_W=True, concave=True) == 0.0


def test_feasibility():
    assert is_feasible(RandomizedPayoff.deterministic([0, 0]), half, flat, BudgetSpec(0.1))
    W = RandomizedPayoff.deterministic(half.w)
    assert bound_cost(half, flat) == 2.0 and is_nontrivial(half, flat, 1.0)
    assert not is_feasible(W, half, flat, BudgetSpec(1.0))
    assert is_feasible(RandomizedPayoff.deterministic([1.0, 1.0]), half, flat, BudgetSpec(1.0))
    v = is_feasible(RandomizedPayoff.deterministic([3.0, 0.0]), half, flat, BudgetSpec(2.0, constrained=True))
    assert not v and "state 0 exceeds W" in v.violations


def test_budget_must_be_positive():
    with pytest.raises(DomainError):
        BudgetSpec(0.0)


def test_worst_case_examples():
    fam = MeasureFamily((Density([1.2, 0.8]), Density([0.8, 1.2])))
    X = RandomizedPayoff.deterministic([1.0, 0.0])
    val, j = worst_case_utility(X, half, fam, min_curve())
    assert (val, j) == (pytest.approx(0.4), 1)
    single = MeasureFamily((Density([1.2, 0.8]),))
    assert worst_case_utility(X, half, single, min_curve())[0] == pytest.approx(0.6)
    const = RandomizedPayoff.deterministic([0.5, 0.5])
    vals = [expected_utility(const, half, e, min_curve()) for e in fam.extremes]
    assert vals[0] == pytest.approx(vals[1])


def test_epsilon_infima_decrease_toward_family_value():
    fam = MeasureFamily((Density([1.0, 1.0]), Density([2.0, 0.0])))
    X = RandomizedPayoff.deterministic([0.0, 1.0])
    target = worst_case_utility(X, half, fam, min_curve())[0]
    vals = epsilon_infima(X, half, fam, min_curve())
    assert np.all(np.diff(vals) <= 0)
    assert vals[-1] - target < 1e-5
