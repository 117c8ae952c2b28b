import numpy as np
import pytest
from scipy.spatial import ConvexHull

from robustmax.instance import Instance, generate_instance
from robustmax.payoff import BudgetSpec, RandomizedPayoff, cost
from robustmax.space import Density, MeasureFamily, PricingMeasure, ScenarioSpace
from robustmax.utility import ConcaveCurve, UtilityCurve, capped_envelope


def step_curve():
    return UtilityCurve.step(1.0)


def min_curve():
    return ConcaveCurve((0.0, 1.0), (0.0, 1.0), (1.0,), 0.0)


def symmetric_instance(x=0.5, curve=None, w=(2.0, 2.0)):
    return Instance(
        curve or step_curve(),
        ScenarioSpace([0.5, 0.5], list(w)),
        PricingMeasure([1.0, 1.0]),
        MeasureFamily((Density([1.2, 0.8]), Density([0.8, 1.2]))),
        BudgetSpec(x),
    )


def with_nonequivalent(inst: Instance, rng) -> Instance:
    """Copy of ``inst`` whose last extreme vanishes on one random state."""
    n = inst.space.n
    z = rng.uniform(0.2, 1.0, n)
    z[int(rng.integers(n))] = 0.0
    z = z / float(inst.space.p @ z)
    ext = inst.family.extremes[:-1] if len(inst.family) > 1 else inst.family.extremes
    return Instance(inst.curve, inst.space, inst.pricing, MeasureFamily(ext + (Density(z),)), inst.budget)


def random_feasible_payoff(rng, inst: Instance, constrained: bool, max_atoms: int = 3) -> RandomizedPayoff:
    """Random randomized payoff within the budget (and below W when constrained)."""
    n = inst.space.n
    top = inst.space.w if constrained else np.full(n, inst.curve.x_max * 1.2)
    states = []
    for i in range(n):
        k = int(rng.integers(1, max_atoms + 1))
        vals = rng.uniform(0.0, top[i], size=k)
        wts = rng.dirichlet(np.ones(k))
        states.append(tuple(zip(vals, wts)))
    X = RandomizedPayoff(tuple(states))
    c = cost(X, inst.space, inst.pricing)
    if c > inst.budget.x:
        s = inst.budget.x / c * rng.uniform(0.5, 1.0)
        X = RandomizedPayoff(tuple(tuple((v * s, w) for v, w in st) for st in X.atoms))
    return X


def hull_oracle(curve: UtilityCurve, grid: np.ndarray) -> np.ndarray:
    """Upper concave envelope of the sampled graph, evaluated on ``grid`` via qhull facets."""
    xs = np.union1d(grid, [t for t in curve.knots if t <= grid[-1]])
    ys = curve(xs)
    span = max(1.0, float(ys.max() - ys.min()))
    pts = np.column_stack([xs, ys])
    # anchor points far below keep the point set full-dimensional for flat curves
    pts = np.vstack([pts, [[xs[0], ys.min() - span], [xs[-1], ys.min() - span]]])
    hull = ConvexHull(pts)
    a, b, c = hull.equations.T
    up = b > 1e-12
    return np.min(-(a[up, None] * grid[None, :] + c[up, None]) / b[up, None], axis=0)


def payoff_grid_brute(space, density, pricing, curve, x, steps=120):
    """Best E_Q[U_c(X)] over a uniform payoff grid; also returns the grid step."""
    env = capped_envelope(curve, np.inf)
    reach = x / (space.p * pricing.psi)
    top = min(float(reach.max()), curve.x_max * 1.5)
    h = top / steps
    axis = np.arange(steps + 1) * h
    grid = np.array(np.meshgrid(*[axis] * space.n, indexing="ij")).reshape(space.n, -1).T
    grid = grid[grid @ (space.p * pricing.psi) <= x + 1e-12]
    return float(np.max(env(grid) @ (space.p * density.z))), h


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def sym():
    return symmetric_instance()


@pytest.fixture
def small_instances():
    return [generate_instance(s, states=1 + s % 4, extremes=1 + s % 3, kinks=s % 3) for s in range(12)]
