"""Flat ``key = value`` experiment configuration.

Keys are the :class:`~slicedot.trainer.TrainConfig` fields plus the
:class:`~slicedot.data.TaskParams` fields. ``#`` starts a comment. Unknown keys
are rejected by name.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .data import TaskParams
from .trainer import TrainConfig

_OPTIONAL = {"eta_refs", "eta_head", "ortho_delta"}

# desk-scale defaults of the golden run
GOLDEN = {
    "n_slices": 4, "n_refs": 50, "dim": 8, "num_classes": 3,
    "tokens_min": 40, "tokens_max": 60, "samples_per_class": 40,
    "eta_theta": 0.05, "eta_s": 0.05, "eta_lambda": 0.05, "alpha": 1.0,
    "epsilon": 0.0, "tau": 0.05, "iterations": 200, "batch_size": 16,
}


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    task: TaskParams = field(default_factory=TaskParams)

    def to_text(self) -> str:
        lines = []
        for part in (self.train, self.task):
            for key, val in asdict(part).items():
                lines.append(f"{key} = {_format(val)}")
        return "\n".join(lines) + "\n"


def _format(val) -> str:
    if val is None:
        return "none"
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, (list, tuple)):
        return ",".join(repr(float(v)) for v in val)
    return repr(val)


def _coerce(key: str, raw: str, kind: str):
    low = raw.strip().lower()
    if key in _OPTIONAL and low == "none":
        return None
    if kind == "bool":
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"{key}: expected true/false, got {raw!r}")
    if kind == "int":
        return int(raw)
    if key == "epsilon":
        vals = [float(v) for v in raw.split(",")]
        return vals[0] if len(vals) == 1 else tuple(vals)
    return float(raw)


def _kinds(cls) -> dict[str, str]:
    out = {}
    for f in fields(cls):
        t = str(f.type)
        out[f.name] = "bool" if t == "bool" else "int" if t == "int" else "float"
    return out


def parse_config(text: str, base: dict | None = None) -> ExperimentConfig:
    train_kinds, task_kinds = _kinds(TrainConfig), _kinds(TaskParams)
    values: dict = dict(GOLDEN if base is None else base)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        kind = train_kinds.get(key) or task_kinds.get(key)
        if kind is None:
            raise ValueError(f"unknown config key {key!r} (line {lineno})")
        values[key] = _coerce(key, raw, kind)
    train = TrainConfig(**{k: v for k, v in values.items() if k in train_kinds})
    task = TaskParams(**{k: v for k, v in values.items() if k in task_kinds})
    return ExperimentConfig(train, task)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
