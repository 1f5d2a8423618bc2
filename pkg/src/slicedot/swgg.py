"""Lifted transport plans and the SWGG dissimilarity.

For a slice ``theta`` the 1D optimal plan between projected measures is
lifted back to a coupling of the original measures; atoms whose projections
collide share the 1D mass in proportion to their own weights. The transport
cost of that coupling in R^d is the SWGG dissimilarity, an upper bound on W2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonPositiveTemperature, NonUniformWeights
from .measures import DiscreteMeasure, project
from .ot1d import TransportPlan, monotone_coupling, sq_cost_matrix
from .swe import alignment_matrix, soft_effective_matrix

TIE_RTOL = 1e-9


@dataclass(frozen=True)
class LiftedPlan:
    plan: TransportPlan
    slice: np.ndarray
    # (source groups, target groups); each group lists original column indices
    collision_groups: tuple[list[list[int]], list[list[int]]]


def group_collisions(values: np.ndarray) -> tuple[np.ndarray, list[list[int]]]:
    """Label each entry with the index of its equal-projection group.

    Neighbours in sorted order join a group when
    ``|a - b| <= 1e-9 * max(1, |a|, |b|)``; groups are numbered ascending.
    """
    order = np.argsort(values, kind="stable")
    labels = np.empty(values.size, dtype=np.intp)
    groups: list[list[int]] = [[int(order[0])]]
    labels[order[0]] = 0
    for prev, cur in zip(order[:-1], order[1:]):
        a, b = values[prev], values[cur]
        if abs(a - b) > TIE_RTOL * max(1.0, abs(a), abs(b)):
            groups.append([])
        groups[-1].append(int(cur))
        labels[cur] = len(groups) - 1
    return labels, groups


def _quotient(values, weights, labels, n_groups):
    mass = np.zeros(n_groups)
    np.add.at(mass, labels, weights)
    first = np.empty(n_groups)
    first[labels[::-1]] = values[::-1]
    return first, mass


def lift_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, theta) -> LiftedPlan:
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measures live in R^{mu.dim} and R^{nu.dim}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    px, py = project(mu, theta), project(nu, theta)
    lab_x, groups_x = group_collisions(px.values)
    lab_y, groups_y = group_collisions(py.values)
    gx_vals, gx_mass = _quotient(px.values, mu.weights, lab_x, len(groups_x))
    gy_vals, gy_mass = _quotient(py.values, nu.weights, lab_y, len(groups_y))
    lam = monotone_coupling(gx_vals, gx_mass, gy_vals, gy_mass)

    share_x = mu.weights / gx_mass[lab_x]
    share_y = nu.weights / gy_mass[lab_y]
    coupling = share_x[:, None] * share_y[None, :] * lam[np.ix_(lab_x, lab_y)]
    cost = float(np.sum(coupling * sq_cost_matrix(mu.points, nu.points)))
    plan = TransportPlan(coupling, np.asarray(mu.weights), np.asarray(nu.weights), cost)
    return LiftedPlan(plan, theta, (groups_x, groups_y))


def swgg(mu: DiscreteMeasure, nu: DiscreteMeasure, theta) -> float:
    return float(np.sqrt(max(lift_plan(mu, nu, theta).plan.cost, 0.0)))


def swgg_soft_squared(refs: np.ndarray, tokens: np.ndarray, theta: np.ndarray, tau: float) -> float:
    """Squared soft SWGG between uniform point sets ``refs`` (d, M) and ``tokens`` (d, M_i)."""
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    align = alignment_matrix(tokens.shape[1], refs.shape[1])
    x = theta @ refs
    y = theta @ tokens
    r = soft_effective_matrix(y, x, tau, align)
    mass = tokens.shape[1] if align is None else align.sum()
    return float(np.sum(sq_cost_matrix(tokens, refs) * r) / mass)


def swgg_soft(mu: DiscreteMeasure, nu: DiscreteMeasure, theta, tau: float) -> float:
    """Softsort surrogate of :func:`swgg` for uniform measures.

    ``mu`` plays the reference role and ``nu`` the token role; when their sizes
    differ the sorted tokens are aligned through the interpolation matrix.
    """
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measures live in R^{mu.dim} and R^{nu.dim}")
    if not (mu.is_uniform() and nu.is_uniform()):
        raise NonUniformWeights("soft SWGG is defined for uniform empirical measures only")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    return float(np.sqrt(max(swgg_soft_squared(mu.points, nu.points, theta, tau), 0.0)))
