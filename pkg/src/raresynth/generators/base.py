from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from .. import schema as S
from ..errors import UnknownKind

KINDS = ("GC", "TVAE", "CTGAN", "CopulaGAN")

# library defaults used by the non-optimised experiments
DEFAULT_HYPERPARAMETERS = {
    "GC": {},
    "TVAE": {"epochs": 300, "embedding_dim": 128, "layer_width": 128, "lr": 1e-3},
    "CTGAN": {"epochs": 300, "gen_lr": 2e-4, "disc_lr": 2e-4, "layer_width": 256},
    "CopulaGAN": {"epochs": 300, "gen_lr": 2e-4, "disc_lr": 2e-4, "layer_width": 256},
}

DEPTH = 2
NOISE_DIM = 128
MAX_BATCH = 64
TRAIN_DTYPE = np.float32  # single precision for speed; saved weights are float64


@dataclass
class GeneratorSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnknownKind(f"unknown generator kind {self.kind!r}")
        merged = dict(DEFAULT_HYPERPARAMETERS[self.kind])
        merged.update(self.hyperparameters or {})
        merged.pop("depth", None)
        self.hyperparameters = merged

    def to_dict(self):
        return {"kind": self.kind, "hyperparameters": dict(sorted(self.hyperparameters.items())), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], dict(d["hyperparameters"]), int(d["seed"]))


@dataclass
class FittedModel:
    spec: GeneratorSpec
    state: Any
    columns: list  # [{"name", "kind", "integer"}]
    bounds: dict  # numeric/datetime column -> (min, max)
    categories: dict  # categorical/boolean column -> sorted category list
    diagnostics: dict = field(default_factory=dict)

    @property
    def kind(self):
        return self.spec.kind

    @property
    def column_names(self):
        return [c["name"] for c in self.columns]

    def __eq__(self, other):
        from .io import dumps

        return isinstance(other, FittedModel) and dumps(self) == dumps(other)


def table_schema(table: pd.DataFrame, schema=None):
    if schema is None:
        schema = S.infer_schema(table)
    return tuple(c for c in schema if c.name in table.columns)


def structure_of(table: pd.DataFrame, schema):
    from ..encoding import category_list

    columns, bounds, cats = [], {}, {}
    for c in schema:
        columns.append({"name": c.name, "kind": c.kind, "integer": bool(c.integer)})
        s = table[c.name]
        if c.kind in (S.NUMERIC, S.DATETIME):
            x = s.astype(float).to_numpy()
            bounds[c.name] = (float(np.min(x)), float(np.max(x)))
        else:
            cats[c.name] = category_list(s)
    return columns, bounds, cats


def schema_of_model(model: FittedModel):
    return tuple(S.ColumnSchema(c["name"], c["kind"], integer=c["integer"]) for c in model.columns)


def empty_table(model: FittedModel) -> pd.DataFrame:
    data = {}
    for c in model.columns:
        if c["kind"] == S.DATETIME or c["integer"]:
            data[c["name"]] = pd.Series([], dtype="int64")
        elif c["kind"] == S.NUMERIC:
            data[c["name"]] = pd.Series([], dtype=float)
        elif c["kind"] == S.BOOLEAN:
            data[c["name"]] = pd.Series([], dtype=bool)
        else:
            data[c["name"]] = pd.Series([], dtype=object)
    return pd.DataFrame(data)


def check_structure(model: FittedModel, table: pd.DataFrame) -> list[str]:
    """Structure-preservation violations of ``table`` against the fitting data."""
    problems = []
    if list(table.columns) != model.column_names:
        problems.append(f"columns {list(table.columns)} != {model.column_names}")
        return problems
    for name, (lo, hi) in model.bounds.items():
        x = table[name].astype(float).to_numpy()
        if len(x) and (x.min() < lo - 1e-9 or x.max() > hi + 1e-9):
            problems.append(f"{name} outside [{lo}, {hi}]")
    for name, cats in model.categories.items():
        extra = set(table[name].tolist()) - set(cats)
        if extra:
            problems.append(f"{name} has unseen categories {sorted(map(str, extra))[:5]}")
    return problems
