"""Synthetic token-set classification data and its text container.

Each class owns a small Gaussian mixture in R^d; a sample of class ``c`` is a
set of ``M_i`` tokens drawn from that mixture. The container is plain text:

    # slicedot-dataset v1
    seed <int>
    param <key> <value>          (one line per generator parameter)
    samples <N>
    sample <label> <d> <M_i>     (then d lines of M_i coordinates)
    ...
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

HEADER = "# slicedot-dataset v1"


@dataclass(frozen=True)
class TaskParams:
    num_classes: int = 3
    samples_per_class: int = 40
    tokens_min: int = 40
    tokens_max: int = 60
    dim: int = 8
    n_components: int = 3
    separation: float = 1.0
    noise: float = 1.0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.samples_per_class < 1 or self.dim < 1 or self.n_components < 1:
            raise ValueError("samples_per_class, dim and n_components must be >= 1")
        if not 1 <= self.tokens_min <= self.tokens_max:
            raise ValueError("need 1 <= tokens_min <= tokens_max")
        if self.separation < 0 or not self.noise > 0:
            raise ValueError("separation must be >= 0 and noise > 0")


@dataclass
class SyntheticDataset:
    samples: list[tuple[np.ndarray, int]]
    seed: int
    params: TaskParams = field(default_factory=TaskParams)

    def __len__(self) -> int:
        return len(self.samples)


def generate(params: TaskParams, seed: int) -> SyntheticDataset:
    rng = np.random.default_rng(seed)
    d, k = params.dim, params.n_components
    centers = params.separation * rng.standard_normal((params.num_classes, k, d))
    samples = []
    for c in range(params.num_classes):
        for _ in range(params.samples_per_class):
            m = int(rng.integers(params.tokens_min, params.tokens_max + 1))
            comp = rng.integers(0, k, size=m)
            tokens = centers[c, comp].T + params.noise * rng.standard_normal((d, m))
            samples.append((tokens, c))
    return SyntheticDataset(samples, seed, params)


def split(samples, seed: int, fractions=(0.8, 0.1, 0.1)):
    """Seeded shuffle then train/validation/test split."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    n_train = int(round(fractions[0] * len(samples)))
    n_val = int(round(fractions[1] * len(samples)))
    pick = lambda idx: [samples[i] for i in idx]  # noqa: E731
    return (pick(order[:n_train]), pick(order[n_train:n_train + n_val]),
            pick(order[n_train + n_val:]))


def nearest_mean_accuracy(train, test) -> float:
    """Sanity baseline: classify a set by the nearest class-average token mean."""
    feats = lambda data: np.array([t.mean(axis=1) for t, _ in data])  # noqa: E731
    xtr, ytr = feats(train), np.array([y for _, y in train])
    classes = np.unique(ytr)
    means = np.stack([xtr[ytr == c].mean(axis=0) for c in classes])
    xte, yte = feats(test), np.array([y for _, y in test])
    pred = classes[np.argmin(((xte[:, None, :] - means[None]) ** 2).sum(-1), axis=1)]
    return float(np.mean(pred == yte))


def format_dataset(ds: SyntheticDataset) -> str:
    lines = [HEADER, f"seed {ds.seed}"]
    for key, val in asdict(ds.params).items():
        lines.append(f"param {key} {val!r}")
    lines.append(f"samples {len(ds.samples)}")
    for tokens, label in ds.samples:
        lines.append(f"sample {label} {tokens.shape[0]} {tokens.shape[1]}")
        for row in tokens:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def parse_dataset(text: str) -> SyntheticDataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != HEADER:
        raise ValueError("missing dataset header")
    pos = 1
    seed = int(_expect(lines, pos, "seed")[0])
    pos += 1
    raw = {}
    while lines[pos].startswith("param "):
        _, key, val = lines[pos].split()
        raw[key] = val
        pos += 1
    fields = TaskParams.__dataclass_fields__
    unknown = set(raw) - set(fields)
    if unknown:
        raise ValueError(f"unknown dataset parameter {sorted(unknown)[0]!r}")
    params = TaskParams(**{k: int(v) if fields[k].type == "int" else float(v) for k, v in raw.items()})
    n = int(_expect(lines, pos, "samples")[0])
    pos += 1
    samples = []
    for _ in range(n):
        label, d, m = (int(t) for t in _expect(lines, pos, "sample"))
        rows = [np.array(lines[pos + 1 + r].split(), dtype=float) for r in range(d)]
        if any(r.size != m for r in rows):
            raise ValueError(f"sample block at line {pos + 1} has wrong row length")
        samples.append((np.stack(rows), label))
        pos += 1 + d
    if pos != len(lines):
        raise ValueError("trailing content after last sample")
    return SyntheticDataset(samples, seed, params)


def _expect(lines, pos, keyword):
    if pos >= len(lines):
        raise ValueError(f"unexpected end of file, expected {keyword!r}")
    parts = lines[pos].split()
    if parts[0] != keyword:
        raise ValueError(f"expected {keyword!r} at line {pos + 1}, got {parts[0]!r}")
    return parts[1:]


def save_dataset(ds: SyntheticDataset, path) -> None:
    Path(path).write_text(format_dataset(ds))


def load_dataset(path) -> SyntheticDataset:
    return parse_dataset(Path(path).read_text())
