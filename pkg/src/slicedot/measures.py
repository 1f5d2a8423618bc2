"""Discrete probability measures, slice directions and projections.

Points are stored column-major: a measure in R^d with M atoms holds a
``(d, M)`` array, so column ``j`` is the ``j``-th support point.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidWeights, NonFiniteInput

_UNIT_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point set ``sum_j weights[j] * delta(points[:, j])``."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[0]

    @property
    def size(self) -> int:
        return self.points.shape[1]

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


@dataclass(frozen=True)
class SliceSet:
    """``L`` unit directions (rows of ``directions``) and their mixture weights."""

    directions: np.ndarray
    mixture_weights: np.ndarray

    def __len__(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]


@dataclass(frozen=True)
class ProjectedMeasure:
    """A one-dimensional measure obtained by projecting a :class:`DiscreteMeasure`."""

    values: np.ndarray
    weights: np.ndarray
    source_index: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]


def make_measure(points, weights=None) -> DiscreteMeasure:
    """Build a normalized measure from a ``(d, M)`` point array.

    A 1D array is read as ``M`` points on the real line. Weights default to
    uniform and are rescaled to sum to one.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] < 1 or pts.shape[0] < 1:
        raise InvalidWeights(f"points must be a non-empty (d, M) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise NonFiniteInput("measure support contains non-finite coordinates")
    m = pts.shape[1]
    if weights is None:
        w = np.full(m, 1.0 / m)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != m:
            raise InvalidWeights(f"expected {m} weights, got {w.shape[0]}")
        if not np.all(np.isfinite(w)):
            raise NonFiniteInput("weights contain non-finite values")
        if np.any(w < 0):
            raise InvalidWeights("weights must be non-negative")
        total = w.sum()
        if total <= 0:
            raise InvalidWeights("weights must have positive total mass")
        # already-normalized input is kept bit-for-bit so text round trips are exact
        if abs(total - 1.0) > 1e-13:
            w = w / total
    return DiscreteMeasure(points=_frozen(pts), weights=_frozen(w))


def normalize_rows(directions: np.ndarray) -> np.ndarray:
    directions = np.asarray(directions, dtype=float)
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def make_slices(directions, mixture_weights=None) -> SliceSet:
    """Wrap directions as a :class:`SliceSet`, normalizing every row."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if not np.all(np.isfinite(dirs)):
        raise NonFiniteInput("slice directions contain non-finite values")
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms == 0):
        raise InvalidWeights("slice directions must be non-zero")
    dirs = dirs / norms[:, None]
    n = dirs.shape[0]
    if mixture_weights is None:
        sigma = np.full(n, 1.0 / n)
    else:
        sigma = np.asarray(mixture_weights, dtype=float).reshape(-1)
        if sigma.shape[0] != n or np.any(sigma < 0) or sigma.sum() <= 0:
            raise InvalidWeights("mixture weights must be non-negative, one per slice")
        sigma = sigma / sigma.sum()
    return SliceSet(directions=_frozen(dirs), mixture_weights=_frozen(sigma))


def sample_slices(n_slices: int, dim: int, seed: int) -> SliceSet:
    """Draw ``n_slices`` directions uniformly on the sphere S^{dim-1}."""
    if n_slices < 1 or dim < 1:
        raise ValueError(f"need n_slices >= 1 and dim >= 1, got {n_slices}, {dim}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_slices, dim))
    # a zero Gaussian draw has probability zero; redraw to stay total
    while np.any(np.linalg.norm(g, axis=1) == 0):
        bad = np.linalg.norm(g, axis=1) == 0
        g[bad] = rng.standard_normal((int(bad.sum()), dim))
    return make_slices(g)


def project_values(points: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Raw linear projection ``direction^T points`` with no normalization.

    Reduced column by column in a fixed order, so a column's value does not
    depend on its position (BLAS kernels do not guarantee that).
    """
    points = np.asarray(points, dtype=float)
    direction = np.asarray(direction, dtype=float).reshape(-1)
    if points.shape[0] != direction.shape[0]:
        raise DimensionMismatch(
            f"direction has length {direction.shape[0]}, points live in R^{points.shape[0]}"
        )
    return (direction[:, None] * points).sum(axis=0)


def project(m: DiscreteMeasure, theta) -> ProjectedMeasure:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != m.dim:
        raise DimensionMismatch(f"theta has length {theta.shape[0]}, measure is in R^{m.dim}")
    if abs(np.linalg.norm(theta) - 1.0) > _UNIT_TOL:
        raise InvalidWeights("theta must have unit norm")
    return ProjectedMeasure(
        values=_frozen(project_values(m.points, theta)),
        weights=m.weights,
        source_index=np.arange(m.size),
    )


def projected_from_values(values, weights=None) -> ProjectedMeasure:
    """Build a 1D measure directly from values (convenience for 1D work)."""
    base = make_measure(np.asarray(values, dtype=float)[None, :], weights)
    return ProjectedMeasure(values=base.points[0], weights=base.weights,
                            source_index=np.arange(base.size))


# -- plain-text container ---------------------------------------------------

def format_measure(m: DiscreteMeasure) -> str:
    lines = [f"{m.dim} {m.size}"]
    for row in m.points:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append(" ".join(f"{v:.17g}" for v in m.weights))
    return "\n".join(lines) + "\n"


def parse_measure(text: str) -> DiscreteMeasure:
    """Parse the ``d M`` / coordinates / weights text format.

    Raises ``ValueError`` (or a subclass) on any malformed input.
    """
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError("first line must be 'd M'")
    d, m = (int(t) for t in rows[0])
    if d < 1 or m < 1:
        raise ValueError("d and M must be positive")
    if len(rows) != d + 2:
        raise ValueError(f"expected {d + 2} non-empty lines, got {len(rows)}")
    body = rows[1:]
    if any(len(r) != m for r in body):
        raise ValueError(f"every coordinate and weight line must hold {m} numbers")
    data = np.array([[float(t) for t in r] for r in body])
    return make_measure(data[:d], data[d])


def save_measure(m: DiscreteMeasure, path) -> None:
    Path(path).write_text(format_measure(m))


def load_measure(path) -> DiscreteMeasure:
    return parse_measure(Path(path).read_text())
