import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from robustmax.lp import LPError, maximize


def test_textbook_problem():
    res = maximize([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert res.value == pytest.approx(36.0)
    np.testing.assert_allclose(res.x, [2, 6])
    np.testing.assert_allclose(res.duals, [0, 1.5, 1])


def test_unbounded_and_bad_rhs():
    with pytest.raises(LPError):
        maximize([1, 0], [[0, 1]], [1])
    with pytest.raises(LPError):
        maximize([1], [[1]], [-1])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 6), m=st.integers(1, 8))
def test_matches_highs(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 2, size=(m, n))
    A = np.vstack([A, np.ones(n)])
    b = np.r_[rng.uniform(0, 3, size=m), 5.0]
    c = rng.uniform(-1, 2, size=n)
    ours = maximize(c, A, b)
    ref = linprog(-c, A_ub=A, b_ub=b, bounds=[(0, None)] * n, method="highs")
    assert ours.value == pytest.approx(-ref.fun, abs=1e-9)
    assert np.all(A @ ours.x <= b + 1e-9)
    # strong duality from the returned multipliers
    assert ours.duals @ b == pytest.approx(ours.value, abs=1e-9)
