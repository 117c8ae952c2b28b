"""Piecewise-linear utility curves, concave envelopes, caps and gap intervals.

A curve is stored in right-continuous normal form: on ``[knots[i], knots[i+1])``
it equals ``values[i] + slopes[i] * (x - knots[i])`` and beyond the last knot it
continues with ``tail_slope``. Upward jumps are allowed at knots, which is the
general shape of a non-decreasing upper-semicontinuous function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .errors import CurveError, DomainError

GAP_TOL = 1e-10


def _as_tuple(seq) -> tuple[float, ...]:
    return tuple(float(v) for v in seq)


@dataclass(frozen=True)
class UtilityCurve:
    knots: tuple[float, ...]
    values: tuple[float, ...]
    slopes: tuple[float, ...]
    tail_slope: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "knots", _as_tuple(self.knots))
        object.__setattr__(self, "values", _as_tuple(self.values))
        object.__setattr__(self, "slopes", _as_tuple(self.slopes))
        object.__setattr__(self, "tail_slope", float(self.tail_slope))
        self._check()

    def _check(self):
        k, v, s = self.knots, self.values, self.slopes
        if len(k) == 0:
            raise CurveError("curve needs at least one knot")
        if len(v) != len(k):
            raise CurveError(f"{len(k)} knots but {len(v)} values")
        if len(s) != len(k) - 1:
            raise CurveError(f"{len(k)} knots need {len(k) - 1} slopes, got {len(s)}")
        if not all(math.isfinite(t) for t in k + v + s + (self.tail_slope,)):
            raise CurveError("curve data must be finite")
        if k[0] != 0.0:
            raise CurveError(f"knot 0 must be at 0, got {k[0]}", index=0)
        for i in range(1, len(k)):
            if not k[i] > k[i - 1]:
                raise CurveError(f"knot {i} ({k[i]}) is not above knot {i - 1} ({k[i - 1]})", index=i)
        for i, slope in enumerate(s):
            if slope < 0:
                raise CurveError(f"slope {i} is negative ({slope})", index=i)
        if self.tail_slope < 0:
            raise CurveError(f"tail slope is negative ({self.tail_slope})", index=len(k) - 1)
        for i in range(len(s)):
            left = v[i] + s[i] * (k[i + 1] - k[i])
            if v[i + 1] < left - 1e-12 * max(1.0, abs(left)):
                raise CurveError(f"knot {i + 1} jumps downward ({left} -> {v[i + 1]})", index=i + 1)

    @classmethod
    def from_points(cls, xs: Sequence[float], ys: Sequence[float], tail_slope: float = 0.0):
        """Continuous curve through the given points (no jumps)."""
        xs = [float(x) for x in xs]
        ys = [float(y) for y in ys]
        slopes = [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]
        return cls(xs, ys, slopes, tail_slope)

    @classmethod
    def step(cls, at: float = 1.0, low: float = 0.0, high: float = 1.0):
        return cls((0.0, at), (low, high), (0.0,), 0.0)

    @property
    def x_max(self) -> float:
        return self.knots[-1]

    @cached_property
    def _arrays(self):
        return (
            np.asarray(self.knots),
            np.asarray(self.values),
            np.asarray(self.slopes + (self.tail_slope,)),
        )

    def __call__(self, x):
        return evaluate(self, x)

    def left_limit(self, i: int) -> float:
        """Limit from the left at knot ``i`` (``i >= 1``)."""
        return self.values[i - 1] + self.slopes[i - 1] * (self.knots[i] - self.knots[i - 1])

    def is_concave(self, tol: float = 1e-12) -> bool:
        for i in range(1, len(self.knots)):
            if abs(self.values[i] - self.left_limit(i)) > tol * max(1.0, abs(self.values[i])):
                return False
        s = self.slopes + (self.tail_slope,)
        return all(s[i + 1] <= s[i] + tol for i in range(len(s) - 1))

    def to_dict(self) -> dict:
        return {
            "knots": list(self.knots),
            "values": list(self.values),
            "slopes": list(self.slopes),
            "tail_slope": self.tail_slope,
        }


@dataclass(frozen=True)
class ConcaveCurve(UtilityCurve):
    """Continuous, non-decreasing, concave piecewise-linear curve."""

    def _check(self):
        super()._check()
        for i in range(1, len(self.knots)):
            left = self.left_limit(i)
            if abs(self.values[i] - left) > 1e-9 * max(1.0, abs(left)):
                raise CurveError(f"concave curve jumps at knot {i}", index=i)
        s = self.slopes + (self.tail_slope,)
        for i in range(len(s) - 1):
            if s[i + 1] > s[i] + 1e-9 * max(1.0, abs(s[i])):
                raise CurveError(f"slope increases after knot {i + 1}", index=i + 1)


def evaluate(curve: UtilityCurve, x):
    """Evaluate ``curve`` at ``x`` (scalar or array), right-continuous at knots."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("utility curves are defined on x >= 0")
    knots, values, slopes = curve._arrays
    idx = np.searchsorted(knots, arr, side="right") - 1
    out = values[idx] + slopes[idx] * (arr - knots[idx])
    if out.ndim == 0:
        return float(out)
    return out


def _upper_hull(xs: Sequence[float], ys: Sequence[float]) -> list[int]:
    """Indices of the upper concave hull of points sorted by x (monotone chain)."""
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (xs[a] - xs[o]) * (ys[i] - ys[o]) - (ys[a] - ys[o]) * (xs[i] - xs[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def concavify(curve: UtilityCurve) -> ConcaveCurve:
    """Smallest concave curve dominating ``curve`` on ``[0, inf)``.

    The envelope's vertices are knots of the source, because between knots the
    source is linear. A positive source tail is treated as a direction of the
    hull: trailing vertices lying under the tail ray are discarded.
    """
    if isinstance(curve, ConcaveCurve):
        return curve
    xs, ys = curve.knots, curve.values
    hull = _upper_hull(xs, ys)
    tail = curve.tail_slope
    while len(hull) >= 2:
        i, j = hull[-2], hull[-1]
        if (ys[j] - ys[i]) / (xs[j] - xs[i]) < tail:
            hull.pop()
        else:
            break
    hx = [xs[i] for i in hull]
    hy = [ys[i] for i in hull]
    slopes = [(hy[i + 1] - hy[i]) / (hx[i + 1] - hx[i]) for i in range(len(hx) - 1)]
    return ConcaveCurve(hx, hy, slopes, tail)


def cap(curve: UtilityCurve, k: float) -> UtilityCurve:
    """The curve ``x -> curve(min(x, k))``."""
    k = float(k)
    if not k > 0:
        raise DomainError(f"cap level must be positive, got {k}")
    if math.isinf(k):
        return curve
    knots = [t for t in curve.knots if t < k]
    n = len(knots)
    values = list(curve.values[:n])
    slopes = list(curve.slopes[: n - 1])
    last = n - 1
    seg = curve.slopes[last] if last < len(curve.slopes) else curve.tail_slope
    knots.append(k)
    values.append(evaluate(curve, k))
    slopes.append(seg)
    return UtilityCurve(knots, values, slopes, 0.0)


@lru_cache(maxsize=4096)
def capped(curve: UtilityCurve, v: float) -> UtilityCurve:
    return curve if math.isinf(v) else cap(curve, v)


@lru_cache(maxsize=4096)
def capped_envelope(curve: UtilityCurve, v: float) -> ConcaveCurve:
    """Concave envelope of ``cap(curve, v)``; ``v = inf`` means no cap."""
    return concavify(capped(curve, v))


@dataclass(frozen=True)
class GapInterval:
    v: float
    y: float
    a: float
    b: float
    lam: float
    alpha_value: float
    beta_value: float

    @property
    def degenerate(self) -> bool:
        return self.a == self.b


def touching_knots(curve: UtilityCurve, v: float = math.inf, tol: float = GAP_TOL) -> list[float]:
    """Knots of the capped curve where it meets its concave envelope."""
    src = capped(curve, v)
    env = capped_envelope(curve, v)
    ks = np.asarray(src.knots)
    d = env(ks) - src(ks)
    return [float(t) for t, di in zip(src.knots, d) if di <= tol * max(1.0, abs(env(t)))]


def gap_interval(curve: UtilityCurve, v: float, y: float, tol: float = GAP_TOL) -> GapInterval:
    """Endpoints of the maximal interval around ``y`` where the capped envelope
    strictly exceeds the capped curve, with the mixing weight placing ``y``
    between them. Pass ``v = math.inf`` for the uncapped curve."""
    v = float(v)
    y = float(y)
    if y < 0 or y > v:
        raise DomainError(f"query point {y} outside [0, {v}]")
    src = capped(curve, v)
    env = capped_envelope(curve, v)
    uy, cy = src(y), env(y)
    if cy - uy <= tol * max(1.0, abs(cy)):
        return GapInterval(v, y, y, y, 1.0, cy, cy)
    touch = touching_knots(curve, v, tol)
    left = [t for t in touch if t <= y]
    right = [t for t in touch if t >= y]
    if not right:
        raise DomainError(f"envelope gap around {y} is unbounded (positive tail slope)")
    a, b = max(left), min(right)
    lam = (b - y) / (b - a)
    return GapInterval(v, y, a, b, lam, env(a), env(b))


def certify_gap(curve: UtilityCurve, gap: GapInterval, points: int = 2048, tol: float = GAP_TOL) -> bool:
    """Check the gap on a grid: strict excess inside, contact at both ends."""
    src = capped(curve, gap.v)
    env = capped_envelope(curve, gap.v)
    if gap.degenerate:
        return abs(env(gap.y) - src(gap.y)) <= tol * max(1.0, abs(env(gap.y)))
    ends = np.array([gap.a, gap.b])
    if np.any(np.abs(env(ends) - src(ends)) > tol * np.maximum(1.0, np.abs(env(ends)))):
        return False
    inner = np.linspace(gap.a, gap.b, points + 2)[1:-1]
    return bool(np.all(env(inner) - src(inner) > 0))


def envelope_gap_endpoints_table(curve: UtilityCurve, v_grid, y_grid):
    """Tabulate ``a(v, y)`` and ``b(v, y)``; entries with ``y > v`` are NaN."""
    v_grid = np.asarray(v_grid, dtype=float)
    y_grid = np.asarray(y_grid, dtype=float)
    if np.any(np.diff(v_grid) <= 0) or np.any(np.diff(y_grid) <= 0):
        raise DomainError("grids must be strictly increasing")
    A = np.full((len(v_grid), len(y_grid)), np.nan)
    B = np.full_like(A, np.nan)
    for i, v in enumerate(v_grid):
        for j, y in enumerate(y_grid):
            if 0 <= y <= v:
                g = gap_interval(curve, v, y)
                A[i, j], B[i, j] = g.a, g.b
    return A, B


def sample_curves(curve: UtilityCurve, x_max: float | None = None, points: int = 201):
    """Rows of ``(x, U(x), U_c(x))`` for plotting."""
    x_max = curve.x_max if x_max is None else x_max
    xs = np.union1d(np.linspace(0.0, x_max, points), [t for t in curve.knots if t <= x_max])
    env = concavify(curve)
    return np.column_stack([xs, curve(xs), env(xs)])


def random_curve(rng: np.random.Generator, kinks: int = 2, x_max: float = 4.0, max_knots: int = 10) -> UtilityCurve:
    """Random non-decreasing curve with ``kinks`` non-concavities and zero tail.

    Starts from a concave profile and, at ``kinks`` interior knots, either
    inserts an upward jump or raises the following slope.
    """
    n_knots = int(rng.integers(max(2, kinks + 2), max(kinks + 3, max_knots + 1)))
    n_knots = min(n_knots, max_knots)
    inner = np.sort(rng.choice(np.arange(1, 400), size=n_knots - 1, replace=False)) / 400 * x_max
    knots = np.concatenate([[0.0], inner])
    slopes = np.sort(rng.uniform(0.0, 1.5, size=n_knots - 1))[::-1].copy()
    jumps = np.zeros(n_knots)
    spots = rng.choice(np.arange(1, n_knots), size=min(kinks, n_knots - 1), replace=False)
    for i in spots:
        if rng.random() < 0.5 or i == n_knots - 1:
            jumps[i] = rng.uniform(0.2, 1.5)
        else:
            slopes[i] = slopes[i - 1] + rng.uniform(0.1, 1.0)
    values = [float(rng.uniform(0.0, 0.5))]
    for i in range(1, n_knots):
        values.append(values[-1] + slopes[i - 1] * (knots[i] - knots[i - 1]) + jumps[i])
    return UtilityCurve(knots, values, slopes, 0.0)
