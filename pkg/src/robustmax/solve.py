"""Value functions of the robust problem on a finite scenario space.

Concavified problems are solved exactly: a single measure by greedy segment
filling, the robust sup-inf by an epigraph LP. Inf-sup values come from a
simplex grid over mixtures of the extreme densities with a Lipschitz gap
certificate, refined by cutting planes. Non-concave sup-inf values are
best-candidate lower estimates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InstanceTooLarge
from .improve import improve, split_in_place
from .lp import LPError, maximize
from .payoff import (
    BudgetSpec,
    RandomizedPayoff,
    expected_utility,
    state_bounds,
    state_curves,
    worst_case_utility,
)
from .space import Density, MeasureFamily, PricingMeasure, ScenarioSpace

EPS_MIX = 1e-6
COARSE = 64
FINE = 1024
CHUNK = 16384


@dataclass
class SolveResult:
    value: float
    payoff: RandomizedPayoff | None
    mixture: np.ndarray | None = None
    method: str = ""
    gap: float = 0.0
    details: dict = field(default_factory=dict)


@dataclass
class Objective:
    """Per-state concave curves cut into linear segments inside the payoff box."""

    space: ScenarioSpace
    pricing: PricingMeasure
    constrained: bool
    curves: list
    raw: list
    bounds: np.ndarray
    base: np.ndarray
    seg_state: np.ndarray
    seg_len: np.ndarray
    seg_slope: np.ndarray


def build_objective(space: ScenarioSpace, pricing: PricingMeasure, curve, constrained: bool) -> Objective:
    curves = state_curves(curve, space, constrained, concave=True)
    raw = state_curves(curve, space, constrained)
    bounds = state_bounds(space, constrained)
    seg_state, seg_len, seg_slope = [], [], []
    for i, c in enumerate(curves):
        ends = list(c.knots) + [math.inf]
        slopes = list(c.slopes) + [c.tail_slope]
        for k, s in enumerate(slopes):
            lo, hi = ends[k], min(ends[k + 1], bounds[i])
            if s <= 0 or hi <= lo:
                continue
            seg_state.append(i)
            seg_len.append(hi - lo)
            seg_slope.append(s)
    base = np.array([c(0.0) for c in curves])
    return Objective(
        space, pricing, constrained, curves, raw, bounds, base,
        np.array(seg_state, dtype=int), np.array(seg_len, dtype=float), np.array(seg_slope, dtype=float),
    )


def greedy_batch(obj: Objective, Z: np.ndarray, x: float, allocate: bool = False):
    """Exact sup of E_Q[U_c(X)] over the budget set for each density row of ``Z``.

    Segments are filled in decreasing order of marginal utility per unit of
    cost, ``z_i * slope / psi_i``; ties keep state-then-segment order.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    p, psi = obj.space.p, obj.pricing.psi
    base = Z @ (p * obj.base)
    if len(obj.seg_state) == 0:
        alloc = np.zeros((len(Z), obj.space.n))
        return (base, alloc) if allocate else base
    st = obj.seg_state
    price = p[st] * psi[st]
    seg_cost = price * obj.seg_len
    values = np.empty(len(Z))
    alloc = np.zeros((len(Z), obj.space.n)) if allocate else None
    for lo in range(0, len(Z), CHUNK):
        zc = Z[lo : lo + CHUNK]
        ratio = zc[:, st] * obj.seg_slope / psi[st]
        order = np.argsort(-ratio, axis=1, kind="stable")
        r_sorted = np.take_along_axis(ratio, order, axis=1)
        c_sorted = seg_cost[order]
        before = np.zeros_like(c_sorted)
        before[:, 1:] = np.cumsum(c_sorted, axis=1)[:, :-1]
        with np.errstate(invalid="ignore"):
            fill = np.clip(x - before, 0.0, c_sorted)
        fill = np.where((r_sorted > 0) & np.isfinite(fill), fill, 0.0)
        values[lo : lo + CHUNK] = base[lo : lo + CHUNK] + np.sum(r_sorted * fill, axis=1)
        if allocate:
            lengths = np.zeros_like(fill)
            np.put_along_axis(lengths, order, fill / price[order], axis=1)
            for i in range(obj.space.n):
                alloc[lo : lo + CHUNK, i] = lengths[:, st == i].sum(axis=1)
    if allocate:
        alloc = np.minimum(alloc, obj.bounds)
        return values, alloc
    return values


def maximize_concave_single(
    space: ScenarioSpace, density: Density, pricing: PricingMeasure, curve, budget: BudgetSpec
) -> SolveResult:
    """sup over the budget set of E_Q[U_c^(W)(X)] for one measure Q (greedy, exact)."""
    obj = build_objective(space, pricing, curve, budget.constrained)
    values, alloc = greedy_batch(obj, density.z[None, :], budget.x, allocate=True)
    X = RandomizedPayoff.deterministic(alloc[0])
    return SolveResult(
        float(values[0]), X, None, "greedy",
        details={"degenerate": not density.equivalent},
    )


def spread_bound(obj: Objective, family: MeasureFamily, x: float) -> float:
    """Upper bound on max_j E_j[f(X)] - min_j E_j[f(X)] over feasible X, for U and U_c."""
    p, psi = obj.space.p, obj.pricing.psi
    reach = np.minimum(obj.bounds, x / (p * psi))
    u_max = max(c(float(r)) for c, r in zip(obj.curves, reach))
    u_min = min(c(0.0) for c in obj.raw)
    Z = family.Z
    diff = 0.0
    for j, k in itertools.permutations(range(len(Z)), 2):
        diff = max(diff, float(np.sum(p * np.clip(Z[j] - Z[k], 0.0, None))))
    return (u_max - u_min) * diff


def extreme_values(obj: Objective, Z: np.ndarray, alloc: np.ndarray) -> np.ndarray:
    """E_j[U_c(X)] for each payoff row of ``alloc`` (rows) and density row of ``Z`` (columns)."""
    util = np.column_stack([c(np.minimum(alloc[:, i], obj.bounds[i])) for i, c in enumerate(obj.curves)])
    return (util * obj.space.p) @ np.atleast_2d(Z).T


def extreme_spreads(obj: Objective, family: MeasureFamily, alloc: np.ndarray) -> np.ndarray:
    """max_j - min_j of E_j[U_c(X)] for each payoff row of ``alloc``.

    At a grid mixture c with greedy optimizer X_c the vector (E_j[U_c(X_c)])_j
    is a subgradient of the convex function g, so g(mu) >= g(c) - |mu - c|_1 / 2
    times this spread.
    """
    E = extreme_values(obj, family.Z, alloc)
    return E.max(axis=1) - E.min(axis=1)


@dataclass
class CuttingPlane:
    mixture: np.ndarray
    value: float
    lower: float
    iterations: int


def cutting_plane(obj: Objective, Z: np.ndarray, x: float, start=(), tol: float = 1e-12,
                  max_iter: int = 500) -> CuttingPlane:
    """Minimize g(mu) = sup_X E_{mu Z}[U_c(X)] over the simplex by Kelley's method.

    g is convex and piecewise linear (a maximum over the finitely many greedy
    vertex payoffs), so the cuts mu -> E_mu[U_c(X)] collected at visited
    mixtures are exact minorants and the method stops after finitely many
    steps. ``lower`` is the minimum of the cut model, a certified bound.
    """
    Z = np.atleast_2d(Z)
    m = len(Z)
    cuts: list[np.ndarray] = []
    best = CuttingPlane(np.full(m, 1.0 / m), math.inf, -math.inf, 0)
    queue = [np.asarray(w, dtype=float) for w in start] or [np.eye(m)[j] for j in range(m)]
    for it in range(max_iter):
        if queue:
            mu = queue.pop(0)
        else:
            mu, t = _cut_model_min(np.array(cuts))
            best.lower = max(best.lower, t)
        val, alloc = greedy_batch(obj, (mu @ Z)[None, :], x, allocate=True)
        if val[0] < best.value:
            best.value, best.mixture = float(val[0]), mu
        best.iterations = it + 1
        if not queue and best.value - best.lower <= tol * max(1.0, abs(best.value)):
            break
        cuts.append(extreme_values(obj, Z, alloc)[0])
    return best


def _cut_model_min(A: np.ndarray) -> tuple[np.ndarray, float]:
    """argmin over the simplex of max_k A[k] @ mu, via the shifted LP on mu_1..mu_{m-1}."""
    m = A.shape[1]
    if m == 1:
        return np.ones(1), float(A.max())
    lo = float(A.min())
    A0 = A - lo
    T = float(A0.max())
    rows = np.column_stack([A0[:, :-1] - A0[:, -1:], np.ones(len(A0))])
    rows = np.vstack([rows, np.r_[np.ones(m - 1), 0.0]])
    rhs = np.r_[T - A0[:, -1], 1.0]
    res = maximize(np.r_[np.zeros(m - 1), 1.0], rows, rhs)
    head = np.clip(res.x[: m - 1], 0.0, None)
    mu = np.r_[head, max(0.0, 1.0 - head.sum())]
    mu = mu / mu.sum()
    return mu, T - res.value + lo


def _scope_family(family: MeasureFamily, scope: str, eps: float) -> MeasureFamily:
    if scope == "Q":
        return family
    if scope == "Qe":
        return family.epsilon_mixed(eps)
    raise DomainError(f"unknown scope {scope!r}")


def maximize_robust_concave(
    space: ScenarioSpace,
    family: MeasureFamily,
    pricing: PricingMeasure,
    curve,
    budget: BudgetSpec,
) -> SolveResult:
    """sup_X min_j E_j[U_c^(W)(X)] by the epigraph LP.

    Variables are X_i, u_i (utility level per state, shifted by U_c(0)) and t
    (shifted by the value of X = 0). Each tangent line of the state's concave
    curve bounds u_i; the LP duals of the t-rows give the minimizing mixture.
    """
    obj = build_objective(space, pricing, curve, budget.constrained)
    n, Z, p = space.n, family.Z, space.p
    m = len(Z)
    at_zero = Z @ (p * obj.base)
    t0 = float(at_zero.min())
    rows, rhs = [], []
    nv = 2 * n + 1
    for j in range(m):
        r = np.zeros(nv)
        r[2 * n] = 1.0
        r[n : 2 * n] = -p * Z[j]
        rows.append(r)
        rhs.append(float(at_zero[j]) - t0)
    for i, c in enumerate(obj.curves):
        starts = list(c.knots[:-1]) + [c.knots[-1]]
        slopes = list(c.slopes) + [c.tail_slope]
        for s0, s in zip(starts, slopes):
            r = np.zeros(nv)
            r[n + i] = 1.0
            r[i] = -s
            rows.append(r)
            rhs.append(max(0.0, c(s0) - s * s0 - obj.base[i]))
    r = np.zeros(nv)
    r[:n] = p * pricing.psi
    rows.append(r)
    rhs.append(budget.x)
    for i in range(n):
        if math.isfinite(obj.bounds[i]):
            r = np.zeros(nv)
            r[i] = 1.0
            rows.append(r)
            rhs.append(obj.bounds[i])
    c_vec = np.zeros(nv)
    c_vec[2 * n] = 1.0
    try:
        res = maximize(c_vec, np.array(rows), np.array(rhs))
    except LPError as exc:
        fallback = infsup_value(space, family, pricing, curve, budget, refine=False)
        fallback.method = "grid-fallback"
        fallback.details["lp_error"] = str(exc)
        return fallback
    X = np.clip(res.x[:n], 0.0, obj.bounds)
    payoff = RandomizedPayoff.deterministic(X)
    duals = np.clip(res.duals[:m], 0.0, None)
    mixture = duals / duals.sum() if duals.sum() > 0 else np.full(m, 1.0 / m)
    value, _ = worst_case_utility(payoff, space, family, curve, budget.constrained, concave=True)
    return SolveResult(
        value, payoff, mixture, "lp",
        details={"lp_value": res.value + t0, "iterations": res.iterations},
    )


def simplex_lattice(m: int, N: int) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of 1/N."""
    if m == 1:
        return np.ones((1, 1))
    pts = []
    for head in itertools.product(range(N + 1), repeat=m - 1):
        s = sum(head)
        if s <= N:
            pts.append(head + (N - s,))
    return np.array(pts, dtype=float) / N


def _local_lattice(center: np.ndarray, radius: float, N: int) -> np.ndarray:
    m = len(center)
    if m == 1:
        return np.ones((1, 1))
    ranges = [
        np.arange(max(0, math.ceil((c - radius) * N - 1e-9)), min(N, math.floor((c + radius) * N + 1e-9)) + 1)
        for c in center[:-1]
    ]
    head = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(m - 1, -1).T
    last = N - head.sum(axis=1)
    ok = (last >= 0) & (np.abs(last / N - center[-1]) <= radius + 1e-12)
    return np.column_stack([head[ok], last[ok]]).astype(float) / N


def _mix_rows(W: np.ndarray, family: MeasureFamily, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Densities for mixture rows; non-equivalent rows are pulled toward the anchor."""
    Z = W @ family.Z
    bad = np.any(Z <= 0, axis=1)
    if np.any(bad):
        anchor = np.zeros(len(family))
        anchor[family.anchor()] = 1.0
        W = W.copy()
        W[bad] = (1 - eps) * W[bad] + eps * anchor
        Z = W @ family.Z
    return W, Z


def _original_weights(family: MeasureFamily, mu: np.ndarray, eps: float) -> np.ndarray:
    """Weights on the original extremes reproducing a mixture of the eps-mixed family."""
    w = np.asarray(mu, dtype=float).copy()
    bad = [j for j, e in enumerate(family.extremes) if not e.equivalent]
    if bad:
        moved = eps * w[bad].sum()
        w[bad] *= 1 - eps
        w[family.anchor()] += moved
    return w


def infsup_value(
    space: ScenarioSpace,
    family: MeasureFamily,
    pricing: PricingMeasure,
    curve,
    budget: BudgetSpec,
    scope: str = "Q",
    concave: bool = True,
    coarse: int = COARSE,
    fine: int = FINE,
    eps: float = EPS_MIX,
    refine: bool = True,
) -> SolveResult:
    """inf over the family of sup over the budget set.

    g(mixture) is the exact single-measure U_c supremum, a convex function of
    the mixture weights. A simplex grid gives an upper bound and, from the
    coarse lattice, a lower bound: every mixture lies within l1 distance
    2*floor(m/2)/coarse of a coarse point c, and near c the function g drops
    at rate at most half the spread of extreme expectations at c's optimizer
    (capped by the global spread bound R). With ``refine`` a cutting-plane
    pass started at the grid minimizer closes the gap to round-off.

    Scope Qe minimizes over the family with non-equivalent extremes pulled
    eps toward the anchor; its lower bound is still the Q one, which is valid
    since Qe is contained in Q.

    For the non-concave objective the inner supremum is the same number
    (randomized payoffs on an atomless space), realized by improving the U_c
    optimizer at the minimizing mixture; the reported value is that payoff's
    U-expectation.
    """
    if scope not in ("Q", "Qe"):
        raise DomainError(f"unknown scope {scope!r}")
    obj = build_objective(space, pricing, curve, budget.constrained)
    m = len(family)
    R = spread_bound(obj, family, budget.x)
    W = simplex_lattice(m, coarse)
    gQ, alloc = greedy_batch(obj, W @ family.Z, budget.x, allocate=True)
    spreads = np.minimum(extreme_spreads(obj, family, alloc), R)
    lower = float(np.min(gQ - spreads * (m // 2) / coarse))
    if scope == "Qe":
        W_eff, Z_eff = _mix_rows(W, family, eps)
        g = greedy_batch(obj, Z_eff, budget.x)
    else:
        W_eff, g = W, gQ
    k = int(np.argmin(g))
    Wf = _local_lattice(W[k], 2.0 / coarse, fine)
    if scope == "Qe":
        Wf, Zf = _mix_rows(Wf, family, eps)
    else:
        Zf = Wf @ family.Z
    gf = greedy_batch(obj, Zf, budget.x)
    if len(gf) and gf.min() < g[k]:
        kf = int(np.argmin(gf))
        mix, best = Wf[kf], float(gf[kf])
    else:
        mix, best = W_eff[k], float(g[k])
    details = {"grid_value": best, "grid_lower_bound": lower, "spread": R, "coarse": coarse, "fine": fine}
    method = "grid"
    if refine:
        try:
            starts = [W[int(np.argmin(gQ))]] + [np.eye(m)[j] for j in range(m)]
            cpQ = cutting_plane(obj, family.Z, budget.x, starts)
            lower = max(lower, cpQ.lower)
            if scope == "Q":
                cp, cp_mix = cpQ, cpQ.mixture
            else:
                fam_e = family.epsilon_mixed(eps)
                cp = cutting_plane(obj, fam_e.Z, budget.x, [W_eff[k]] + [np.eye(m)[j] for j in range(m)])
                cp_mix = _original_weights(family, cp.mixture, eps)
            details["cutting_plane_iterations"] = cp.iterations
            if cp.value <= best:
                mix, best = cp_mix, cp.value
            method = "grid+cuts"
        except LPError as exc:
            details["lp_error"] = str(exc)
    details["lower_bound"] = lower
    density = family.mixture(mix)
    val, alloc = greedy_batch(obj, density.z[None, :], budget.x, allocate=True)
    X = RandomizedPayoff.deterministic(alloc[0])
    value = best
    if not concave:
        star, plan = improve(X, space, density, pricing, curve, budget.constrained, on_support=True)
        value = expected_utility(star, space, density, curve, budget.constrained)
        details["witness_residual"] = abs(value - best)
        details["witness_cost"] = plan.cost_after
        X = star
        method += "+improve"
    return SolveResult(value, X, mix, method, max(0.0, best - lower), details)


def _candidates(obj: Objective) -> list[np.ndarray]:
    out = []
    for i, c in enumerate(obj.raw):
        b = obj.bounds[i]
        pts = {0.0} | {t for t in c.knots if t <= b} | {t for t in obj.curves[i].knots if t <= b}
        if math.isfinite(b):
            pts.add(float(b))
        out.append(np.array(sorted(pts)))
    return out


def deterministic_grid(obj: Objective, Z: np.ndarray, x: float, max_states: int = 6, max_candidates: int = 8):
    """Best deterministic payoff on the knot grid with one budget completion.

    Maximizes min over the rows of ``Z`` of E_z[U(X)]. Returns the value and
    the payoff. For a single row this is exact over deterministic payoffs:
    on every product of linear pieces the objective is linear, so an optimum
    sits at a vertex with at most one coordinate off the knots.
    """
    n = obj.space.n
    cands = _candidates(obj)
    size = max(len(c) for c in cands)
    if n > max_states or size > max_candidates:
        raise InstanceTooLarge(f"{n} states with up to {size} candidate values (limits {max_states}, {max_candidates})")
    p, psi = obj.space.p, obj.pricing.psi
    price = p * psi
    grids = np.array(np.meshgrid(*cands, indexing="ij")).reshape(n, -1).T
    spend = grids @ price
    grids = grids[spend <= x + 1e-12]
    spend = grids @ price
    slack = np.clip(x - spend, 0.0, None)
    Z = np.atleast_2d(Z)
    options = [grids]
    for i in range(n):
        g = grids.copy()
        g[:, i] = np.minimum(obj.bounds[i], g[:, i] + slack / price[i])
        options.append(g)
    best_val, best_X = -math.inf, None
    for X in options:
        util = np.column_stack([obj.raw[i](X[:, i]) for i in range(n)])
        vals = (util * p) @ Z.T
        worst = vals.min(axis=1)
        k = int(np.argmax(worst))
        if worst[k] > best_val:
            best_val, best_X = float(worst[k]), X[k]
    return best_val, RandomizedPayoff.deterministic(best_X)


def maximize_nonconcave_brute(
    space: ScenarioSpace,
    density: Density,
    pricing: PricingMeasure,
    curve,
    budget: BudgetSpec,
    max_states: int = 6,
    max_candidates: int = 8,
) -> SolveResult:
    """sup over deterministic payoffs of E_Q[U^(W)(X)] by enumeration (oracle only)."""
    obj = build_objective(space, pricing, curve, budget.constrained)
    value, X = deterministic_grid(obj, density.z, budget.x, max_states, max_candidates)
    return SolveResult(value, X, None, "brute")


def supinf_value(
    space: ScenarioSpace,
    family: MeasureFamily,
    pricing: PricingMeasure,
    curve,
    budget: BudgetSpec,
    scope: str = "Q",
    concave: bool = True,
    eps: float = EPS_MIX,
) -> SolveResult:
    """sup over the budget set of inf over the family.

    For U_c this is the epigraph LP. For U it is the best of: the LP optimizer
    with each state's gap atoms split onto the envelope endpoints, the LP
    optimizer itself, that optimizer improved under each equivalent extreme
    and under the LP's minimizing mixture, and the deterministic knot grid
    when the instance is small enough. The attained value is a lower bound
    and the U_c value an upper bound; their difference is the reported gap.
    ``details`` names the winning candidate class.
    """
    fam = _scope_family(family, scope, eps)
    obj = build_objective(space, pricing, curve, budget.constrained)
    mix_gap = eps * spread_bound(obj, family, budget.x) if scope == "Qe" else 0.0
    lp = maximize_robust_concave(space, fam, pricing, curve, budget)
    if concave:
        lp.gap += mix_gap
        return lp
    constrained = budget.constrained
    cands: list[tuple[str, RandomizedPayoff]] = [
        ("split", split_in_place(lp.payoff, space, curve, constrained)),
        ("concave-optimizer", lp.payoff),
    ]
    measures = [fam.extremes[j] for j in fam.equivalent_indices]
    if lp.mixture is not None:
        measures.append(fam.mixture(lp.mixture))
    for q in measures:
        star, _ = improve(lp.payoff, space, q, pricing, curve, constrained, on_support=True)
        cands.append(("improved", star))
    best_val, best_X, best_kind = -math.inf, None, ""
    for kind, X in cands:
        v, _ = worst_case_utility(X, space, fam, curve, constrained)
        if v > best_val:
            best_val, best_X, best_kind = v, X, kind
    try:
        v, X = deterministic_grid(obj, fam.Z, budget.x)
        if v > best_val:
            best_val, best_X, best_kind = v, X, "deterministic-grid"
    except InstanceTooLarge:
        pass
    # U <= U_c pointwise, so the concave value bounds the attained one from above.
    return SolveResult(
        best_val, best_X, None, "candidates", mix_gap + max(0.0, lp.value - best_val),
        details={"attained_by": best_kind, "n_candidates": len(cands)},
    )


def value_curve(space, family, pricing, curve, xs, constrained: bool = False) -> np.ndarray:
    """Robust U_c value at each budget level of ``xs``."""
    return np.array([
        maximize_robust_concave(space, family, pricing, curve, BudgetSpec(float(x), constrained)).value for x in xs
    ])
