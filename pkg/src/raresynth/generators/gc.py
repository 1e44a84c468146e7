"""Gaussian copula with kernel-density marginals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import ndtr, ndtri

from .. import schema as S
from ..encoding import KdeMarginal, kde_cdf, kde_fit, kde_icdf, _sort_key
from ..errors import ValidationError
from .base import FittedModel, GeneratorSpec, empty_table, structure_of, table_schema

_U_CLIP = 1e-10


@dataclass
class CategoricalMarginal:
    """Categories laid on contiguous probability intervals, most frequent first."""

    categories: list
    probs: np.ndarray

    @property
    def edges(self):
        return np.concatenate([[0.0], np.cumsum(self.probs)])

    def cdf_midpoints(self, values):
        index = {c: i for i, c in enumerate(self.categories)}
        e = self.edges
        codes = np.array([index[v] for v in values], dtype=int)
        return 0.5 * (e[codes] + e[codes + 1])

    def inverse(self, u):
        e = self.edges
        codes = np.searchsorted(e[1:-1], u, side="right")
        return [self.categories[c] for c in codes]

    def to_dict(self):
        return {"categories": list(self.categories), "probs": self.probs}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["categories"]), np.asarray(d["probs"]))


def fit_categorical(series: pd.Series) -> CategoricalMarginal:
    counts = series.value_counts(sort=False)
    items = sorted(counts.items(), key=lambda kv: (-kv[1], _sort_key(kv[0])))
    cats = [k.item() if hasattr(k, "item") else k for k, _ in items]
    n = sum(v for _, v in items)
    return CategoricalMarginal(cats, np.array([v / n for _, v in items]))


def repair_psd(theta):
    """Clip negative eigenvalues to zero and renormalize to unit diagonal."""
    theta = 0.5 * (theta + theta.T)
    w, v = np.linalg.eigh(theta)
    if w.min() >= 0:
        out = theta
    else:
        out = (v * np.maximum(w, 0.0)) @ v.T
    d = np.sqrt(np.clip(np.diag(out), 1e-300, None))
    out = out / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return 0.5 * (out + out.T)


@dataclass
class CopulaState:
    theta: np.ndarray
    marginals: list  # per column: KdeMarginal or CategoricalMarginal

    def to_dict(self):
        ms = []
        for m in self.marginals:
            tag = "kde" if isinstance(m, KdeMarginal) else "categorical"
            ms.append({"type": tag, **m.to_dict()})
        return {"theta": self.theta, "marginals": ms}

    @classmethod
    def from_dict(cls, d):
        ms = []
        for m in d["marginals"]:
            m = dict(m)
            tag = m.pop("type")
            ms.append(KdeMarginal.from_dict(m) if tag == "kde" else CategoricalMarginal.from_dict(m))
        return cls(np.asarray(d["theta"]), ms)


def normal_scores(table: pd.DataFrame, schema, marginals) -> np.ndarray:
    cols = []
    for col, m in zip(schema, marginals):
        s = table[col.name]
        if isinstance(m, KdeMarginal):
            u = kde_cdf(m, s.astype(float).to_numpy())
        else:
            u = m.cdf_midpoints(s.tolist())
        cols.append(ndtri(np.clip(u, _U_CLIP, 1 - _U_CLIP)))
    return np.column_stack(cols)


def fit_gc(table: pd.DataFrame, seed=0, schema=None, spec=None) -> FittedModel:
    schema = table_schema(table, schema)
    if len(table) < 2:
        raise ValidationError("need at least 2 rows to fit a copula")
    marginals = []
    for col in schema:
        if col.kind in (S.NUMERIC, S.DATETIME):
            marginals.append(kde_fit(table[col.name].astype(float).to_numpy()))
        else:
            marginals.append(fit_categorical(table[col.name]))
    z = normal_scores(table, schema, marginals)
    d = z.shape[1]
    sd = z.std(axis=0)
    theta = np.eye(d)
    live = sd > 1e-12
    if live.sum() > 1:
        theta[np.ix_(live, live)] = np.corrcoef(z[:, live], rowvar=False)
    pre_min_eig = float(np.linalg.eigvalsh(theta).min())
    theta = repair_psd(theta)
    columns, bounds, cats = structure_of(table, schema)
    spec = spec or GeneratorSpec("GC", {}, seed)
    return FittedModel(spec, CopulaState(theta, marginals), columns, bounds, cats,
                       diagnostics={"min_eigenvalue_pre_repair": pre_min_eig})


def _cholesky(theta):
    jitter = 0.0
    for _ in range(12):
        try:
            return np.linalg.cholesky(theta + jitter * np.eye(len(theta)))
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0 else jitter * 10
    raise np.linalg.LinAlgError("correlation matrix is not positive definite")


def sample_gc(model: FittedModel, n: int, seed=0) -> pd.DataFrame:
    if n < 0:
        raise ValidationError("n must be >= 0")
    if n == 0:
        return empty_table(model)
    rng = np.random.default_rng(seed)
    state: CopulaState = model.state
    L = _cholesky(state.theta)
    z = rng.standard_normal((n, len(state.theta))) @ L.T
    u = np.clip(ndtr(z), _U_CLIP, 1 - _U_CLIP)
    out = {}
    for j, (col, m) in enumerate(zip(model.columns, state.marginals)):
        name = col["name"]
        if isinstance(m, KdeMarginal):
            x = np.clip(kde_icdf(m, u[:, j]), *model.bounds[name])
            if col["kind"] == S.DATETIME:
                x = np.rint(x).astype("int64")
            out[name] = x
        else:
            vals = m.inverse(u[:, j])
            if col["kind"] == S.BOOLEAN:
                out[name] = pd.Series(vals, dtype=bool)
            elif col["integer"]:
                out[name] = pd.Series(vals, dtype="int64")
            else:
                out[name] = pd.Series(vals, dtype=object)
    return pd.DataFrame(out, columns=model.column_names)
