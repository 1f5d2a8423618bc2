"""Exact squared-Euclidean optimal transport.

``w2_1d`` is the closed-form quantile coupling on the line. ``w2_exact``
solves the d-dimensional problem exactly for small instances and serves as
the reference every sliced quantity is checked against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .errors import DimensionMismatch, EmptyMeasure, InstanceTooLarge
from .measures import DiscreteMeasure, ProjectedMeasure, SliceSet, project

BRUTE_FORCE_MAX = 8
LP_MAX = 64


@dataclass(frozen=True)
class TransportPlan:
    coupling: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    cost: float


def monotone_coupling(a_vals, a_w, b_vals, b_w) -> np.ndarray:
    """North-west corner coupling of two 1D measures along their sorted order.

    Ties are broken by original index. The returned matrix is indexed in the
    original (unsorted) order of both inputs.
    """
    a_vals = np.asarray(a_vals, dtype=float)
    b_vals = np.asarray(b_vals, dtype=float)
    n, m = a_vals.shape[0], b_vals.shape[0]
    ia = np.argsort(a_vals, kind="stable")
    ib = np.argsort(b_vals, kind="stable")
    coupling = np.zeros((n, m))
    i = j = 0
    ra, rb = float(a_w[ia[0]]), float(b_w[ib[0]])
    while i < n and j < m:
        if ra == rb:
            coupling[ia[i], ib[j]] += ra
            i += 1
            j += 1
            if i < n:
                ra = float(a_w[ia[i]])
            if j < m:
                rb = float(b_w[ib[j]])
        elif ra < rb:
            coupling[ia[i], ib[j]] += ra
            rb -= ra
            i += 1
            if i < n:
                ra = float(a_w[ia[i]])
        else:
            coupling[ia[i], ib[j]] += rb
            ra -= rb
            j += 1
            if j < m:
                rb = float(b_w[ib[j]])
    # rounding can leave a few ulps unassigned on one side; give them to the last cell
    if i < n or j < m:
        last_a = ia[min(i, n - 1)]
        last_b = ib[min(j, m - 1)]
        while i < n:
            coupling[ia[i], last_b] += ra
            i += 1
            if i < n:
                ra = float(a_w[ia[i]])
        while j < m:
            coupling[last_a, ib[j]] += rb
            j += 1
            if j < m:
                rb = float(b_w[ib[j]])
    return coupling


def w2_1d(mu: ProjectedMeasure, nu: ProjectedMeasure) -> tuple[float, TransportPlan]:
    """Wasserstein-2 distance between two measures on the real line."""
    if mu.size == 0 or nu.size == 0:
        raise EmptyMeasure("both 1D measures need at least one atom")
    coupling = monotone_coupling(mu.values, mu.weights, nu.values, nu.weights)
    diff = mu.values[:, None] - nu.values[None, :]
    cost = float(np.sum(coupling * diff * diff))
    plan = TransportPlan(coupling, np.asarray(mu.weights), np.asarray(nu.weights), cost)
    return float(np.sqrt(cost)), plan


def sq_cost_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared distances between columns of ``x`` (d, n) and ``y`` (d, m)."""
    diff = x[:, :, None] - y[:, None, :]
    return np.einsum("dij,dij->ij", diff, diff)


@lru_cache(maxsize=None)
def _all_permutations(m: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m))), dtype=np.intp)


def _brute_force(cost: np.ndarray) -> tuple[np.ndarray, float]:
    m = cost.shape[0]
    perms = _all_permutations(m)
    totals = cost[np.arange(m), perms].sum(axis=1)
    best = perms[int(np.argmin(totals))]
    coupling = np.zeros_like(cost)
    coupling[np.arange(m), best] = 1.0 / m
    return coupling, float(np.sum(coupling * cost))


def _lp(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    rows = np.kron(np.eye(n), np.ones((1, m)))
    cols = np.kron(np.ones((1, n)), np.eye(m))
    res = linprog(
        cost.ravel(),
        A_eq=np.vstack([rows, cols]),
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return np.clip(res.x.reshape(n, m), 0.0, None)


def w2_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, method: str = "auto"
             ) -> tuple[float, TransportPlan]:
    """Exact W2 between two discrete measures in R^d.

    ``method`` is ``"brute"`` (enumerate all M! matchings, uniform equal-size
    supports with M <= 8), ``"lp"`` (HiGHS linear program, sizes <= 64) or
    ``"auto"``, which picks brute force when it applies, an assignment solver
    for larger uniform equal-size pairs, and the LP otherwise.
    """
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measures live in R^{mu.dim} and R^{nu.dim}")
    cost = sq_cost_matrix(mu.points, nu.points)
    n, m = cost.shape
    uniform_square = n == m and mu.is_uniform() and nu.is_uniform()

    if method == "brute" or (method == "auto" and uniform_square and n <= BRUTE_FORCE_MAX):
        if not uniform_square:
            raise ValueError("brute-force mode needs uniform supports of equal size")
        if n > BRUTE_FORCE_MAX:
            raise InstanceTooLarge(f"brute force limited to M <= {BRUTE_FORCE_MAX}, got {n}")
        coupling, total = _brute_force(cost)
    elif method in ("auto", "lp"):
        if max(n, m) > LP_MAX:
            raise InstanceTooLarge(f"exact solver limited to M <= {LP_MAX}, got {max(n, m)}")
        if method == "auto" and uniform_square:
            r, c = linear_sum_assignment(cost)
            coupling = np.zeros_like(cost)
            coupling[r, c] = 1.0 / n
        else:
            coupling = _lp(cost, mu.weights, nu.weights)
        total = float(np.sum(coupling * cost))
    else:
        raise ValueError(f"unknown method {method!r}")

    total = max(total, 0.0)
    plan = TransportPlan(coupling, np.asarray(mu.weights), np.asarray(nu.weights), total)
    return float(np.sqrt(total)), plan


def sliced_w2(mu: DiscreteMeasure, nu: DiscreteMeasure, slices: SliceSet) -> float:
    if mu.dim != nu.dim or slices.dim != mu.dim:
        raise DimensionMismatch(
            f"measures in R^{mu.dim}, R^{nu.dim}; slices in R^{slices.dim}"
        )
    total = 0.0
    for theta, sigma in zip(slices.directions, slices.mixture_weights):
        dist, _ = w2_1d(project(mu, theta), project(nu, theta))
        total += sigma * dist * dist
    return float(np.sqrt(total))
