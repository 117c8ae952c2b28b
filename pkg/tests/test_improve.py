import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import min_curve, random_feasible_payoff, step_curve
from robustmax.errors import NonEquivalentDensityError
from robustmax.improve import (
    improve,
    improve_supremum_check,
    reversed_orientation,
    sigma_threshold,
    split_in_place,
)
from robustmax.instance import generate_instance
from robustmax.payoff import BudgetSpec, RandomizedPayoff, cost, expected_utility
from robustmax.space import Density, MeasureFamily, PricingMeasure, ScenarioSpace

half = ScenarioSpace([0.5, 0.5], [2.0, 2.0])
tilted = PricingMeasure([0.8, 1.2])
flat_q = Density([1.0, 1.0])


def test_two_state_example():
    X = RandomizedPayoff.deterministic([0.5, 0.5])
    star, plan = improve(X, half, flat_q, tilted, step_curve())
    assert star.atoms == (((1.0, 1.0),), ((0.0, 1.0),))
    (cls,) = plan.classes
    assert cls.lambda_mean == pytest.approx(0.5)
    assert (plan.cost_before, plan.cost_after, plan.cost_reversed) == pytest.approx((0.5, 0.4, 0.6))
    assert plan.utility_U_star == pytest.approx(0.5) == plan.utility_Uc_X
    # exhaustive check of both deterministic orientations
    costs = {(1.0, 0.0): None, (0.0, 1.0): None}
    for x in costs:
        Y = RandomizedPayoff.deterministic(x)
        costs[x] = cost(Y, half, tilted)
        assert expected_utility(Y, half, flat_q, step_curve()) == pytest.approx(0.5)
    assert plan.cost_after == pytest.approx(min(costs.values()))
    rev = reversed_orientation(X, half, flat_q, tilted, step_curve())
    assert cost(rev, half, tilted) == pytest.approx(max(costs.values()))


def test_empty_gap_set_is_identity():
    X = RandomizedPayoff.deterministic([1.0, 0.0])
    star, plan = improve(X, half, flat_q, tilted, step_curve())
    assert star is X and plan.empty and not plan.classes


def test_constant_phi_keeps_cost():
    X = RandomizedPayoff.deterministic([0.3, 0.6])
    star, plan = improve(X, half, flat_q, PricingMeasure([1.0, 1.0]), step_curve())
    assert plan.cost_after == pytest.approx(plan.cost_before, abs=1e-15)
    assert plan.cost_reversed == pytest.approx(plan.cost_before, abs=1e-15)


def test_non_equivalent_density_is_refused():
    with pytest.raises(NonEquivalentDensityError):
        improve(RandomizedPayoff.deterministic([0.5, 0.5]), half, Density([2.0, 0.0]), tilted, step_curve())


@pytest.mark.parametrize(
    "weights, lams, sigma, below",
    [
        ([0.5, 0.5], [1.0, 1.0], 0.0, (0.0, 0.0)),
        ([0.5, 0.5], [0.0, 0.0], 1.0, (1.0, 1.0)),
        ([0.5, 0.5], [0.5, 0.5], 0.5, (1.0, 0.0)),
    ],
)
def test_sigma_threshold_examples(weights, lams, sigma, below):
    s = sigma_threshold(weights, lams)
    assert s.sigma == pytest.approx(sigma)
    assert s.below == below and s.boundary is None


def test_sigma_threshold_splits_one_slot():
    s = sigma_threshold([0.2, 0.3, 0.5], [0.4, 0.4, 0.4])
    assert s.sigma == pytest.approx(0.6)
    assert s.boundary == 2 and s.fraction == pytest.approx(0.2)
    assert sum(1 for b in s.below if 0 < b < 1) <= 1


def test_supremum_check_on_step():
    space = ScenarioSpace([1.0], [2.0])
    fam = MeasureFamily((Density([1.0]),))
    rep = improve_supremum_check(space, fam, PricingMeasure([1.0]), step_curve(), BudgetSpec(0.5),
                                 [RandomizedPayoff.deterministic([0.5])])
    assert rep.ok
    assert rep.rows[0]["sup_Uc"] == pytest.approx(0.5) == rep.rows[0]["sup_U"]


def test_supremum_check_concave_is_trivial():
    fam = MeasureFamily((flat_q,))
    rep = improve_supremum_check(half, fam, tilted, min_curve(), BudgetSpec(0.5))
    assert rep.ok and rep.max_sup_gap == 0.0


def test_split_in_place_keeps_means():
    X = RandomizedPayoff.deterministic([0.25, 1.5])
    Y = split_in_place(X, half, step_curve())
    np.testing.assert_allclose(Y.means(), X.means())
    assert Y.atoms[0] == ((0.0, 0.75), (1.0, 0.25))


def cost_oracle(X, space, density, pricing, curve, plan):
    """Minimum cost over all endpoint splits that keep each class balanced (LP)."""
    total = cost(X, space, pricing)
    for cls in plan.classes:
        price = np.array([space.p[s.state] * pricing.psi[s.state] * s.weight for s in cls.slots])
        mass = np.array([space.p[s.state] * density.z[s.state] * s.weight for s in cls.slots])
        lam = np.array([s.lam for s in cls.slots])
        # y_k = fraction of slot k sent to b; balance: mass @ (1 - y) = mass @ lam
        res = linprog(price * (cls.b - cls.a), A_eq=[mass], b_eq=[mass.sum() - mass @ lam],
                      bounds=[(0, 1)] * len(price), method="highs")
        assert res.status == 0
        vals = np.array([s.value for s in cls.slots])
        total += res.fun + price @ (cls.a - vals)
    return total


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**31), conditional=st.booleans())
def test_improve_properties(seed, conditional):
    rng = np.random.default_rng(seed)
    inst = generate_instance(seed, states=int(rng.integers(1, 6)), extremes=1, kinks=int(rng.integers(1, 4)))
    q = inst.family.extremes[0]
    X = random_feasible_payoff(rng, inst, conditional)
    star, plan = improve(X, inst.space, q, inst.pricing, inst.curve, conditional)
    assert plan.chain_residual < 1e-10
    assert plan.cost_after <= plan.cost_before + 1e-10
    assert plan.cost_after <= plan.cost_reversed + 1e-12
    assert np.all(star.min_values() >= 0)
    if conditional:
        assert plan.within_bound
    for cls in plan.classes:
        assert cls.balance_residual < 1e-12
        assert sum(1 for b in cls.split.below if 0 < b < 1) <= 1
    touched = {s.state for s in plan.gap_slots}
    for i in set(range(inst.space.n)) - touched:
        assert star.atoms[i] == X.atoms[i]
    assert plan.cost_after == pytest.approx(cost_oracle(X, inst.space, q, inst.pricing, inst.curve, plan), abs=1e-10)
