"""Analytic gradients through the softsort SWE/SWGG pipeline.

Gradients are hand-derived reverse passes over a fixed, shallow graph:

    x = theta^T U, y = theta^T V  ->  S_U, S_V (softsort)
    R = S_V^T I S_U               ->  z = y R - x,  D^2 = <C, R> / mass

with ``C[k, j] = |v_k - u_j|^2``. Every public gradient here is checked
against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyBatch, NonPositiveTemperature
from .ot1d import sq_cost_matrix
from .softsort import _ensure_tie_free, soft_sort_forward, soft_sort_vjp
from .swe import alignment_matrix

SQRT_FLOOR = 1e-18


@dataclass(frozen=True)
class ParamGradients:
    d_theta: np.ndarray
    d_refs: np.ndarray
    d_head: np.ndarray
    objective_value: float


@dataclass(frozen=True)
class SwggGradient:
    value: float
    d_theta: np.ndarray
    d_refs: np.ndarray
    d_tokens: np.ndarray


class _SliceCache:
    """Forward intermediates of one (sample, slice) pair."""

    __slots__ = ("theta", "x", "y", "su", "sv", "left", "r", "z", "d2", "d",
                 "align", "mass", "cost", "u_fw", "v_fw")

    def __init__(self, theta, refs, tokens, cost, align, tau, check_ties=True):
        self.theta = theta
        self.x = theta @ refs
        self.y = theta @ tokens
        if check_ties:
            _ensure_tie_free(self.x)
            _ensure_tie_free(self.y)
        self.su = soft_sort_forward(self.x, tau)
        self.sv = soft_sort_forward(self.y, tau)
        self.align = align
        self.left = self.sv[0].T if align is None else self.sv[0].T @ align
        self.r = self.left @ self.su[0]
        self.z = self.y @ self.r - self.x
        self.cost = cost
        self.mass = tokens.shape[1] if align is None else align.sum()
        self.d2 = float(np.sum(cost * self.r) / self.mass)
        self.d = float(np.sqrt(max(self.d2, 0.0)))

    def backward(self, g_z, g_d, tau):
        """Return ``(g_x, g_y, g_cost)`` for upstream gradients on ``z`` and ``D``."""
        g_d2 = 0.0 if (g_d == 0.0 or self.d2 < SQRT_FLOOR) else g_d / (2.0 * self.d)
        if g_z is None:
            g_r = (g_d2 / self.mass) * self.cost
            g_x = np.zeros_like(self.x)
            g_y = np.zeros_like(self.y)
        else:
            g_r = np.outer(self.y, g_z) + (g_d2 / self.mass) * self.cost
            g_x = -np.asarray(g_z, dtype=float)
            g_y = self.r @ g_z
        g_su = self.left.T @ g_r
        g_left = g_r @ self.su[0].T
        g_sv = g_left.T if self.align is None else self.align @ g_left.T
        g_x = g_x + soft_sort_vjp(*self.su, tau, g_su)
        g_y = g_y + soft_sort_vjp(*self.sv, tau, g_sv)
        g_cost = (g_d2 / self.mass) * self.r
        return g_x, g_y, g_cost


def _cost_grads(refs, tokens, g_cost):
    """Pull ``dL/dC`` back to the reference and token coordinates."""
    d_refs = 2.0 * (refs * g_cost.sum(axis=0) - tokens @ g_cost)
    d_tokens = 2.0 * (tokens * g_cost.sum(axis=1) - refs @ g_cost.T)
    return d_refs, d_tokens


def grad_swgg_soft(refs, tokens, theta, tau: float) -> SwggGradient:
    """Soft SWGG between ``refs`` (d, M) and ``tokens`` (d, M_i) with its gradients.

    ``theta`` is used as given (no renormalization), so ``d_theta`` is the
    ambient gradient in R^d.
    """
    refs = np.asarray(refs, dtype=float)
    tokens = np.asarray(tokens, dtype=float)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if refs.shape[0] != tokens.shape[0] or theta.shape[0] != refs.shape[0]:
        raise DimensionMismatch("refs, tokens and theta must share the ambient dimension")
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    cost = sq_cost_matrix(tokens, refs)
    cache = _SliceCache(theta, refs, tokens, cost, alignment_matrix(tokens.shape[1], refs.shape[1]), tau)
    g_x, g_y, g_cost = cache.backward(None, 1.0, tau)
    d_refs, d_tokens = _cost_grads(refs, tokens, g_cost)
    d_refs += np.outer(theta, g_x)
    d_tokens += np.outer(theta, g_y)
    return SwggGradient(cache.d, refs @ g_x + tokens @ g_y, d_refs, d_tokens)


# -- prediction head: linear map + softmax cross-entropy --------------------

def head_shapes(head_size: int, embed_dim: int) -> int:
    """Number of classes encoded by a flat head vector ``[W.ravel(), b]``."""
    n_classes, rem = divmod(head_size, embed_dim + 1)
    if rem or n_classes < 1:
        raise DimensionMismatch(
            f"head of size {head_size} does not fit embedding dimension {embed_dim}"
        )
    return n_classes


def split_head(head: np.ndarray, embed_dim: int) -> tuple[np.ndarray, np.ndarray]:
    k = head_shapes(head.size, embed_dim)
    return head[: k * embed_dim].reshape(k, embed_dim), head[k * embed_dim:]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.sum(np.exp(shifted)))


@dataclass(frozen=True)
class BatchEvaluation:
    loss: float
    swgg: np.ndarray           # (N, L) soft SWGG per sample and slice
    grads: ParamGradients      # gradient of loss + sum_l w_l * mean_i swgg[i, l]


def evaluate_batch(batch: Sequence[tuple[np.ndarray, int]], refs: np.ndarray,
                   thetas: np.ndarray, head: np.ndarray, tau: float,
                   swgg_weights: np.ndarray | None = None,
                   check_ties: bool = True) -> BatchEvaluation:
    """Forward and reverse pass over a mini-batch.

    The differentiated objective is the mean cross-entropy plus, when
    ``swgg_weights`` is given, ``sum_l swgg_weights[l] * mean_i D_l(i)``.
    Samples are reduced in input order so results are bitwise reproducible.
    """
    if len(batch) == 0:
        raise EmptyBatch("batch must contain at least one sample")
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    refs = np.asarray(refs, dtype=float)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    d, n_ref = refs.shape
    n_slices = thetas.shape[0]
    if thetas.shape[1] != d:
        raise DimensionMismatch(f"slices in R^{thetas.shape[1]}, references in R^{d}")
    embed_dim = n_slices * n_ref
    w, b = split_head(np.asarray(head, dtype=float), embed_dim)
    n = len(batch)

    d_theta = np.zeros_like(thetas)
    d_refs = np.zeros_like(refs)
    d_w = np.zeros_like(w)
    d_b = np.zeros_like(b)
    swgg = np.zeros((n, n_slices))
    loss = 0.0
    for i, (tokens, label) in enumerate(batch):
        tokens = np.asarray(tokens, dtype=float)
        if tokens.ndim != 2 or tokens.shape[0] != d:
            raise DimensionMismatch(f"sample {i} tokens have shape {tokens.shape}, expected ({d}, M_i)")
        align = alignment_matrix(tokens.shape[1], n_ref)
        cost = sq_cost_matrix(tokens, refs)
        caches = [_SliceCache(thetas[l], refs, tokens, cost, align, tau, check_ties)
                  for l in range(n_slices)]
        emb = np.concatenate([c.z for c in caches])
        logp = log_softmax(w @ emb + b)
        loss += -logp[label]
        g_logits = np.exp(logp)
        g_logits[label] -= 1.0
        g_logits /= n
        d_w += np.outer(g_logits, emb)
        d_b += g_logits
        g_emb = w.T @ g_logits

        g_cost_total = np.zeros_like(cost)
        for l, c in enumerate(caches):
            swgg[i, l] = c.d
            g_d = 0.0 if swgg_weights is None else swgg_weights[l] / n
            g_x, g_y, g_cost = c.backward(g_emb[l * n_ref:(l + 1) * n_ref], g_d, tau)
            d_theta[l] += refs @ g_x + tokens @ g_y
            d_refs += np.outer(thetas[l], g_x)
            g_cost_total += g_cost
        d_refs += _cost_grads(refs, tokens, g_cost_total)[0]

    loss /= n
    objective = loss
    if swgg_weights is not None:
        objective += float(np.dot(swgg_weights, swgg.mean(axis=0)))
    grads = ParamGradients(d_theta, d_refs, np.concatenate([d_w.ravel(), d_b]), float(objective))
    return BatchEvaluation(float(loss), swgg, grads)


def grad_task_loss(batch, refs, slices, head, tau: float) -> ParamGradients:
    """Mean cross-entropy gradients w.r.t. slices, references and head.

    ``refs`` may be a :class:`~slicedot.swe.ReferenceSet` or a ``(d, M)`` array,
    ``slices`` a :class:`~slicedot.measures.SliceSet` or an ``(L, d)`` array.
    """
    refs = getattr(refs, "points", refs)
    thetas = getattr(slices, "directions", slices)
    return evaluate_batch(batch, refs, thetas, head, tau).grads


def finite_diff_check(f: Callable[[np.ndarray], float], point, grad, step: float = 1e-5,
                      directions: int = 20, seed: int = 0, basis: str = "random",
                      abs_floor: float = 1e-8) -> float:
    """Worst relative error between central differences and ``grad`` along sampled directions.

    ``basis="random"`` probes unit Gaussian directions, ``"coordinate"`` probes
    randomly chosen coordinate axes. When both derivative estimates are below
    ``abs_floor`` the absolute difference is reported instead.
    """
    x0 = np.asarray(point, dtype=float).ravel()
    g = np.asarray(grad, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    if basis == "coordinate":
        idx = rng.choice(x0.size, size=min(directions, x0.size), replace=False)
        dirs = np.eye(x0.size)[idx]
    else:
        dirs = rng.standard_normal((directions, x0.size))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    worst = 0.0
    for u in dirs:
        fd = (f(x0 + step * u) - f(x0 - step * u)) / (2.0 * step)
        an = float(g @ u)
        scale = max(abs(fd), abs(an))
        err = abs(fd - an) / scale if scale > abs_floor else abs(fd - an)
        worst = max(worst, err)
    return worst
