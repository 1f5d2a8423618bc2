"""Sliced Wasserstein embedding (SWE) pooling.

A token set ``V`` of shape ``(d, M_i)`` is mapped to a fixed-length vector of
size ``L * M`` by matching, slice by slice, its sorted projections to those of
a reference set ``U`` of shape ``(d, M)`` and recording the per-reference
displacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, SizeTooSmall
from .measures import SliceSet, project_values
from .softsort import hard_sort_permutation, soft_sort_matrix


@dataclass(frozen=True)
class ReferenceSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise SizeTooSmall(f"reference set must be (d, M) with M >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteInput("reference points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SweEmbedding:
    values: np.ndarray
    n_slices: int
    n_refs: int

    def per_slice(self) -> np.ndarray:
        """View as ``(L, M)``, one row per slice."""
        return self.values.reshape(self.n_slices, self.n_refs)


@dataclass(frozen=True)
class InterpolationMatrix:
    matrix: np.ndarray
    source_size: int
    target_size: int


def interpolation_matrix(source_size: int, target_size: int) -> InterpolationMatrix:
    """Linear interpolation map from ``source_size`` sorted tokens to ``target_size`` slots.

    Row ``j`` (0-based) puts weight ``1 - chi`` on column ``m`` and ``chi`` on
    ``m + 1``, where ``m + chi = j (target - 1) / (source - 1)``. Integer
    arithmetic keeps ``m`` exact.
    """
    if source_size < 2 or target_size < 2:
        raise SizeTooSmall(f"interpolation needs sizes >= 2, got {source_size} -> {target_size}")
    mat = np.zeros((source_size, target_size))
    num = np.arange(source_size) * (target_size - 1)
    cols = num // (source_size - 1)
    chi = (num % (source_size - 1)) / (source_size - 1)
    rows = np.arange(source_size)
    mat[rows, cols] = 1.0 - chi
    inner = chi > 0
    mat[rows[inner], cols[inner] + 1] = chi[inner]
    return InterpolationMatrix(mat, source_size, target_size)


def alignment_matrix(source_size: int, target_size: int) -> np.ndarray | None:
    """Rank-space map between token and reference orders.

    ``None`` stands for the identity (equal sizes). A single token is
    broadcast to every reference slot.
    """
    if source_size == target_size:
        return None
    if source_size == 1:
        return np.ones((1, target_size))
    if target_size == 1:
        return np.full((source_size, 1), 1.0)
    return interpolation_matrix(source_size, target_size).matrix


def _check_shapes(tokens, refs: ReferenceSet, slices: SliceSet) -> np.ndarray:
    v = np.asarray(tokens, dtype=float)
    if v.ndim != 2 or v.shape[1] < 1:
        raise DimensionMismatch(f"tokens must be a (d, M_i) array, got shape {v.shape}")
    d = refs.points.shape[0]
    if v.shape[0] != d or slices.dim != d:
        raise DimensionMismatch(
            f"tokens in R^{v.shape[0]}, references in R^{d}, slices in R^{slices.dim}"
        )
    return v


def swe_embed(tokens, refs: ReferenceSet, slices: SliceSet) -> SweEmbedding:
    """Hard-sort SWE embedding, laid out slice-major."""
    v = _check_shapes(tokens, refs, slices)
    u = refs.points
    n_tok, n_ref = v.shape[1], u.shape[1]
    align = alignment_matrix(n_tok, n_ref)
    out = np.empty((len(slices), n_ref))
    for l, theta in enumerate(slices.directions):
        x = project_values(u, theta)
        y = project_values(v, theta)
        sorted_y = y[hard_sort_permutation(y)]
        matched = sorted_y if align is None else sorted_y @ align
        order_x = hard_sort_permutation(x)
        out[l, order_x] = matched - x[order_x]
    return SweEmbedding(out.ravel(), len(slices), n_ref)


def soft_effective_matrix(y, x, tau: float, align: np.ndarray | None) -> np.ndarray:
    """``R = S_V^T I S_U``: soft token-to-reference matching in original index order."""
    s_v = soft_sort_matrix(y, tau).matrix
    s_u = soft_sort_matrix(x, tau).matrix
    left = s_v.T if align is None else s_v.T @ align
    return left @ s_u


def swe_embed_soft(tokens, refs: ReferenceSet, slices: SliceSet, tau: float) -> SweEmbedding:
    """Differentiable SWE embedding with both sorts replaced by softsort."""
    v = _check_shapes(tokens, refs, slices)
    u = refs.points
    align = alignment_matrix(v.shape[1], u.shape[1])
    out = np.empty((len(slices), u.shape[1]))
    for l, theta in enumerate(slices.directions):
        x = project_values(u, theta)
        y = project_values(v, theta)
        out[l] = y @ soft_effective_matrix(y, x, tau, align) - x
    return SweEmbedding(out.ravel(), len(slices), u.shape[1])
