"""Hard and soft (temperature-relaxed) ascending sort permutations.

Convention: the soft matrix ``S`` has rows indexed by sorted rank and columns
by original position, so ``S @ x`` approximates ``sort(x)`` ascending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, NonPositiveTemperature, TiedInputs


@dataclass(frozen=True)
class SoftPermutation:
    matrix: np.ndarray
    temperature: float


def hard_sort_permutation(x) -> np.ndarray:
    """Indices that sort ``x`` ascending, ties resolved by original index."""
    return np.argsort(np.asarray(x, dtype=float), kind="stable")


def hard_sort_matrix(x) -> np.ndarray:
    """0/1 matrix with ``H[i, order[i]] = 1``; the zero-temperature limit of the soft matrix."""
    order = hard_sort_permutation(x)
    h = np.zeros((order.size, order.size))
    h[np.arange(order.size), order] = 1.0
    return h


def _check(x, tau) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise NonFiniteInput("softsort input must be a non-empty finite vector")
    return x


def _soft(x: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = np.argsort(x, kind="stable")
    diff = x[order][:, None] - x[None, :]
    logits = -np.abs(diff) / tau
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    s = e / e.sum(axis=1, keepdims=True)
    return s, order, diff


def soft_sort_matrix(x, tau: float) -> SoftPermutation:
    x = _check(x, tau)
    s, _, _ = _soft(x, tau)
    return SoftPermutation(matrix=s, temperature=float(tau))


def _ensure_tie_free(x: np.ndarray) -> None:
    sx = np.sort(x)
    if sx.size > 1 and np.any(np.diff(sx) == 0):
        raise TiedInputs("softsort derivative requested at an input with tied entries")


def soft_sort_jacobian(x, tau: float) -> np.ndarray:
    """Derivative ``J[i, j, p] = d S[i, j] / d x[p]`` of the soft sort matrix.

    The sorting permutation is treated as locally constant, which is exact
    whenever ``x`` has no tied entries.
    """
    x = _check(x, tau)
    _ensure_tie_free(x)
    s, order, diff = _soft(x, tau)
    m = x.size
    # dA[i, k] / dx[p] = -sign(diff[i, k]) / tau * (delta(order[i], p) - delta(k, p))
    g = -np.sign(diff) / tau
    da = np.zeros((m, m, m))
    da[np.arange(m), :, order] += g
    da[:, np.arange(m), np.arange(m)] -= g
    mean_da = np.einsum("ik,ikp->ip", s, da)
    return s[:, :, None] * (da - mean_da[:, None, :])


def soft_sort_vjp(s: np.ndarray, order: np.ndarray, diff: np.ndarray, tau: float,
                  grad_s: np.ndarray) -> np.ndarray:
    """Pull a gradient ``dL/dS`` back to ``dL/dx`` without forming the full Jacobian."""
    grad_logits = s * (grad_s - np.sum(grad_s * s, axis=1, keepdims=True))
    w = grad_logits * (-np.sign(diff) / tau)
    gx = -w.sum(axis=0)
    np.add.at(gx, order, w.sum(axis=1))
    return gx


def soft_sort_forward(x, tau: float):
    """Soft matrix plus the intermediates :func:`soft_sort_vjp` needs."""
    x = _check(x, tau)
    return _soft(x, tau)
