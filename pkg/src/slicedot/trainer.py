"""Resilient primal-dual training of SWE slices under SWGG constraints.

Each iteration takes a projected gradient step on the primal variables
(slices, references, head) of the Lagrangian

    loss + alpha/2 |s|^2 + lambda^T (D(Theta) - eps - s),

renormalizes every slice back onto the sphere, then updates the slack
``s`` and the duals ``lambda`` with projected steps. ``D`` is the batch mean
of the soft SWGG per slice.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import EmptyBatch, NonFiniteGradient
from .grad import evaluate_batch, log_softmax, split_head
from .measures import SliceSet, make_slices, sample_slices
from .swe import ReferenceSet, swe_embed

log = logging.getLogger(__name__)

Sample = tuple[np.ndarray, int]


@dataclass(frozen=True)
class TrainConfig:
    eta_theta: float = 0.05
    eta_s: float = 0.05
    eta_lambda: float = 0.05
    alpha: float = 1.0
    epsilon: float | Sequence[float] = 0.0
    tau: float = 0.05
    iterations: int = 200
    batch_size: int = 16
    seed: int = 0
    constrained: bool = True
    n_slices: int = 4
    n_refs: int = 50
    eta_refs: float | None = None
    eta_head: float | None = None
    lr_decay: float = 1.0
    ortho_delta: float | None = None

    def __post_init__(self):
        for name in ("eta_theta", "eta_s", "eta_lambda", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("eta_refs", "eta_head"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be >= 1")
        if self.n_slices < 1 or self.n_refs < 1:
            raise ValueError("n_slices and n_refs must be >= 1")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")
        eps = np.atleast_1d(np.asarray(self.epsilon, dtype=float))
        if np.any(eps < 0) or np.any(np.isnan(eps)):
            raise ValueError("epsilon entries must be non-negative")
        if eps.size not in (1, self.n_slices):
            raise ValueError(f"epsilon must be a scalar or have {self.n_slices} entries")

    def epsilon_vector(self) -> np.ndarray:
        eps = np.atleast_1d(np.asarray(self.epsilon, dtype=float))
        return np.broadcast_to(eps, (self.n_slices,)).copy()


@dataclass(frozen=True)
class TrainState:
    slices: SliceSet
    refs: ReferenceSet
    head: np.ndarray
    slack: np.ndarray
    duals: np.ndarray
    iteration: int = 0
    ortho_dual: float = 0.0


@dataclass(frozen=True)
class StepRecord:
    loss: float
    swgg_per_slice: np.ndarray
    slack: np.ndarray
    duals: np.ndarray
    constraint_violation: np.ndarray


@dataclass
class TrainHistory:
    records: list[StepRecord] = field(default_factory=list)
    iterations_per_epoch: int = 1
    best_state: TrainState | None = None
    best_val_acc: float | None = None

    def __len__(self) -> int:
        return len(self.records)

    def as_array(self) -> np.ndarray:
        """Rows of ``[iter, loss, (swgg, slack, dual, violation) per slice]``."""
        rows = []
        for t, r in enumerate(self.records, start=1):
            per_slice = np.stack([r.swgg_per_slice, r.slack, r.duals, r.constraint_violation], axis=1)
            rows.append(np.concatenate([[t, r.loss], per_slice.ravel()]))
        return np.array(rows)

    def final_epoch(self) -> list[StepRecord]:
        return self.records[-min(self.iterations_per_epoch, len(self.records)):]

    def to_csv(self) -> str:
        n_slices = self.records[0].swgg_per_slice.size if self.records else 0
        header = ["iter", "loss"]
        for l in range(n_slices):
            header += [f"swgg_{l}", f"slack_{l}", f"dual_{l}", f"violation_{l}"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in self.as_array():
            writer.writerow([str(int(row[0]))] + [f"{v:.12g}" for v in row[1:]])
        return buf.getvalue()


# -- closed-form pieces of the iteration ------------------------------------

def slack_update(slack, duals, alpha: float, eta_s: float) -> np.ndarray:
    slack = np.asarray(slack, dtype=float)
    return np.maximum(slack - eta_s * (alpha * slack - np.asarray(duals, dtype=float)), 0.0)


def dual_update(duals, swgg, epsilon, slack, eta_lambda: float) -> np.ndarray:
    violation = np.asarray(swgg, dtype=float) - (np.asarray(epsilon, dtype=float) + slack)
    return np.maximum(np.asarray(duals, dtype=float) + eta_lambda * violation, 0.0)


def ortho_penalty(slices, delta: float) -> tuple[float, np.ndarray]:
    """Constraint ``|Theta Theta^T - I_L|_F - delta`` and its gradient in ``Theta``."""
    thetas = np.atleast_2d(np.asarray(getattr(slices, "directions", slices), dtype=float))
    gap = thetas @ thetas.T - np.eye(thetas.shape[0])
    norm = float(np.linalg.norm(gap))
    grad = np.zeros_like(thetas) if norm == 0.0 else 2.0 * gap @ thetas / norm
    return norm - delta, grad


# -- state helpers -----------------------------------------------------------

def init_state(dataset: Sequence[Sample], config: TrainConfig, rng: np.random.Generator,
               first_batch: Sequence[Sample]) -> TrainState:
    d = np.asarray(dataset[0][0]).shape[0]
    n_classes = int(max(label for _, label in dataset)) + 1
    slices = sample_slices(config.n_slices, d, config.seed)
    scale = float(np.concatenate([np.asarray(t).ravel() for t, _ in first_batch]).std())
    refs = ReferenceSet(scale * rng.standard_normal((d, config.n_refs)))
    head = np.zeros(n_classes * (config.n_slices * config.n_refs + 1))
    zeros = np.zeros(config.n_slices)
    return TrainState(slices, refs, head, zeros, zeros.copy())


def batch_swgg(batch: Sequence[Sample], state: TrainState, tau: float) -> np.ndarray:
    """Batch-mean soft SWGG per slice, forward only."""
    ev = evaluate_batch(batch, state.refs.points, state.slices.directions,
                        state.head, tau, swgg_weights=None, check_ties=False)
    return ev.swgg.mean(axis=0)


def lagrangian_value(state: TrainState, batch: Sequence[Sample], config: TrainConfig) -> float:
    ev = evaluate_batch(batch, state.refs.points, state.slices.directions,
                        state.head, config.tau, check_ties=False)
    d_mean = ev.swgg.mean(axis=0)
    eps = config.epsilon_vector()
    value = ev.loss + 0.5 * config.alpha * float(state.slack @ state.slack)
    value += float(state.duals @ (d_mean - (eps + state.slack)))
    if config.ortho_delta is not None:
        value += state.ortho_dual * ortho_penalty(state.slices, config.ortho_delta)[0]
    return float(value)


def primal_dual_step(state: TrainState, batch: Sequence[Sample], config: TrainConfig,
                     rate_scale: float = 1.0) -> tuple[TrainState, StepRecord]:
    if len(batch) == 0:
        raise EmptyBatch("batch must contain at least one sample")
    eta_theta = config.eta_theta * rate_scale
    eta_refs = (config.eta_refs if config.eta_refs is not None else config.eta_theta) * rate_scale
    eta_head = (config.eta_head if config.eta_head is not None else config.eta_theta) * rate_scale
    eta_s = config.eta_s * rate_scale
    eta_lambda = config.eta_lambda * rate_scale

    weights = state.duals if config.constrained else None
    ev = evaluate_batch(batch, state.refs.points, state.slices.directions, state.head,
                        config.tau, swgg_weights=weights, check_ties=False)
    g = ev.grads
    d_theta = g.d_theta
    if config.constrained and config.ortho_delta is not None and state.ortho_dual > 0:
        d_theta = d_theta + state.ortho_dual * ortho_penalty(state.slices, config.ortho_delta)[1]
    for name, arr in (("slices", d_theta), ("references", g.d_refs), ("head", g.d_head)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteGradient(
                f"non-finite gradient for {name} at iteration {state.iteration + 1} "
                f"(loss={ev.loss!r})"
            )

    thetas = state.slices.directions - eta_theta * d_theta
    new = replace(
        state,
        slices=make_slices(thetas, state.slices.mixture_weights),
        refs=ReferenceSet(state.refs.points - eta_refs * g.d_refs),
        head=state.head - eta_head * g.d_head,
        iteration=state.iteration + 1,
    )

    d_after = batch_swgg(batch, new, config.tau)
    eps = config.epsilon_vector()
    if config.constrained:
        slack = slack_update(state.slack, state.duals, config.alpha, eta_s)
        duals = dual_update(state.duals, d_after, eps, slack, eta_lambda)
        ortho_dual = state.ortho_dual
        if config.ortho_delta is not None:
            val, _ = ortho_penalty(new.slices, config.ortho_delta)
            ortho_dual = max(state.ortho_dual + eta_lambda * val, 0.0)
        new = replace(new, slack=slack, duals=duals, ortho_dual=ortho_dual)
    record = StepRecord(
        loss=ev.loss,
        swgg_per_slice=d_after,
        slack=new.slack.copy(),
        duals=new.duals.copy(),
        constraint_violation=d_after - (eps + new.slack),
    )
    return new, record


# -- inference ---------------------------------------------------------------

def predict_logits(state: TrainState, tokens) -> np.ndarray:
    """Class logits using hard sorting (the inference path)."""
    emb = swe_embed(tokens, state.refs, state.slices).values
    w, b = split_head(state.head, emb.size)
    return w @ emb + b


def accuracy(state: TrainState, data: Sequence[Sample]) -> float:
    if len(data) == 0:
        return float("nan")
    hits = sum(int(np.argmax(predict_logits(state, t)) == y) for t, y in data)
    return hits / len(data)


def hard_loss(state: TrainState, data: Sequence[Sample]) -> float:
    return float(np.mean([-log_softmax(predict_logits(state, t))[y] for t, y in data]))


def train(dataset: Sequence[Sample], config: TrainConfig,
          validation: Sequence[Sample] | None = None) -> tuple[TrainState, TrainHistory]:
    """Run ``config.iterations`` primal-dual steps over reshuffled mini-batches.

    With ``validation`` given, the state with the best validation accuracy seen
    at epoch ends is kept in ``history.best_state`` (first best wins).
    """
    if len(dataset) == 0:
        raise EmptyBatch("dataset is empty")
    rng = np.random.default_rng(config.seed)
    n = len(dataset)
    per_epoch = math.ceil(n / config.batch_size)
    history = TrainHistory(iterations_per_epoch=per_epoch)

    order = rng.permutation(n)
    first_batch = [dataset[k] for k in order[: config.batch_size]]
    state = init_state(dataset, config, rng, first_batch)

    pos = 0
    epoch = 0
    for t in range(config.iterations):
        if pos >= n:
            if validation is not None:
                _checkpoint(history, state, validation)
            order = rng.permutation(n)
            pos = 0
            epoch += 1
        batch = [dataset[k] for k in order[pos: pos + config.batch_size]]
        pos += config.batch_size
        state, record = primal_dual_step(state, batch, config, config.lr_decay ** epoch)
        history.records.append(record)
        if t % max(1, config.iterations // 10) == 0:
            log.debug("iter %d loss %.4g swgg %s duals %s", t + 1, record.loss,
                      np.round(record.swgg_per_slice, 4), np.round(record.duals, 4))
    if validation is not None:
        _checkpoint(history, state, validation)
    return state, history


def _checkpoint(history: TrainHistory, state: TrainState, validation) -> None:
    acc = accuracy(state, validation)
    if history.best_val_acc is None or acc > history.best_val_acc:
        history.best_val_acc = acc
        history.best_state = state
