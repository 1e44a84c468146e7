"""Random forest of Gini-split binary trees, grown by a numba kernel."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
import pandas as pd

from .. import schema as S
from ..encoding import category_list
from ..errors import SingleClassInput, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 2
    max_features: object = "sqrt"  # "sqrt", None (all) or an int
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1")

    def features_per_split(self, d: int) -> int:
        if self.max_features is None:
            return d
        if self.max_features == "sqrt":
            return max(1, int(math.isqrt(d)))
        return max(1, min(d, int(self.max_features)))


@dataclass
class FeatureSpec:
    name: str
    categorical: bool
    categories: list = field(default_factory=list)


def feature_specs(X: pd.DataFrame) -> list:
    specs = []
    known = S.by_name(S.RAW_SCHEMA)
    for name in X.columns:
        col = known.get(name)
        s = X[name]
        categorical = (
            col.kind == S.CATEGORICAL if col is not None
            else not (s.dtype.kind in "fiub")
        )
        specs.append(FeatureSpec(name, categorical, category_list(s) if categorical else []))
    return specs


def to_matrix(X: pd.DataFrame, specs) -> tuple[np.ndarray, int]:
    """Numeric view of ``X``: categoricals become codes, unseen ones -1."""
    out = np.empty((len(X), len(specs)))
    unknown = 0
    for j, sp in enumerate(specs):
        s = X[sp.name]
        if sp.categorical:
            index = {c: i for i, c in enumerate(sp.categories)}
            codes = np.array([index.get(v, -1) for v in s.tolist()], dtype=float)
            unknown += int((codes < 0).sum())
            out[:, j] = codes
        else:
            out[:, j] = s.astype(float).to_numpy()
    return out, unknown


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _gini(pos, n):
    if n == 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


@numba.njit(cache=True)
def _best_numeric(x, y, min_leaf):
    n = x.shape[0]
    order = np.argsort(x, kind="mergesort")
    total_pos = 0.0
    for i in range(n):
        total_pos += y[i]
    best = np.inf
    thr = 0.0
    left_pos = 0.0
    for i in range(n - 1):
        left_pos += y[order[i]]
        nl = i + 1
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        a = x[order[i]]
        b = x[order[i + 1]]
        if a == b:
            continue
        imp = nl * _gini(left_pos, nl) + nr * _gini(total_pos - left_pos, nr)
        if imp < best:
            best = imp
            thr = 0.5 * (a + b)
            if thr == b:
                thr = a
    return best, thr


@numba.njit(cache=True)
def _best_categorical(x, y, min_leaf, n_codes):
    n = x.shape[0]
    cnt = np.zeros(n_codes)
    pos = np.zeros(n_codes)
    total_pos = 0.0
    for i in range(n):
        c = int(x[i])
        if c >= 0:
            cnt[c] += 1.0
            pos[c] += y[i]
        total_pos += y[i]
    best = np.inf
    code = -1.0
    for c in range(n_codes):
        nl = cnt[c]
        nr = n - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        imp = nl * _gini(pos[c], nl) + nr * _gini(total_pos - pos[c], nr)
        if imp < best:
            best = imp
            code = float(c)
    return best, code


@numba.njit(cache=True)
def _grow(X, y, rows, is_cat, n_codes, max_depth, min_leaf, mtry, seed):
    np.random.seed(seed)
    d = X.shape[1]
    cap = 2 * rows.shape[0] + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    npos = np.zeros(cap)
    ncnt = np.zeros(cap)
    unk_left = np.zeros(cap, np.bool_)

    # explicit stack of (node, start, end, depth) over a shared row buffer
    buf = rows.copy()
    stack = np.empty((cap, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = buf.shape[0]
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    feats = np.arange(d)
    while top > 0:
        top -= 1
        node = stack[top, 0]
        s = stack[top, 1]
        e = stack[top, 2]
        depth = stack[top, 3]
        m = e - s
        p = 0.0
        for i in range(s, e):
            p += y[buf[i]]
        npos[node] = p
        ncnt[node] = m
        if depth >= max_depth or m < 2 * min_leaf or p == 0.0 or p == m:
            continue
        # partial Fisher-Yates for the feature subset
        for i in range(mtry):
            j = i + np.random.randint(d - i)
            tmp = feats[i]
            feats[i] = feats[j]
            feats[j] = tmp
        xs = np.empty(m)
        ys = np.empty(m)
        for i in range(m):
            ys[i] = y[buf[s + i]]
        best = np.inf
        best_f = -1
        best_t = 0.0
        for k in range(mtry):
            f = feats[k]
            for i in range(m):
                xs[i] = X[buf[s + i], f]
            if is_cat[f]:
                imp, t = _best_categorical(xs, ys, min_leaf, n_codes[f])
            else:
                imp, t = _best_numeric(xs, ys, min_leaf)
            if imp < best:
                best = imp
                best_f = f
                best_t = t
        parent = m * _gini(p, m)
        if best_f < 0 or parent - best <= 1e-12:
            continue
        # partition buf[s:e] in place
        i = s
        j = e - 1
        while i <= j:
            v = X[buf[i], best_f]
            if is_cat[best_f]:
                go_left = v == best_t
            else:
                go_left = v <= best_t
            if go_left:
                i += 1
            else:
                tmp = buf[i]
                buf[i] = buf[j]
                buf[j] = tmp
                j -= 1
        feature[node] = best_f
        threshold[node] = best_t
        l = n_nodes
        r = n_nodes + 1
        n_nodes += 2
        left[node] = l
        right[node] = r
        unk_left[node] = (i - s) >= (e - i)
        stack[top, 0] = r
        stack[top, 1] = i
        stack[top, 2] = e
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = l
        stack[top, 1] = s
        stack[top, 2] = i
        stack[top, 3] = depth + 1
        top += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            npos[:n_nodes], ncnt[:n_nodes], unk_left[:n_nodes])


@numba.njit(cache=True)
def _predict_tree(X, is_cat, feature, threshold, left, right, npos, ncnt, unk_left, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            f = feature[node]
            v = X[i, f]
            if is_cat[f]:
                if v < 0:
                    go_left = unk_left[node]
                else:
                    go_left = v == threshold[node]
            else:
                go_left = v <= threshold[node]
            node = left[node] if go_left else right[node]
        out[i] += npos[node] / ncnt[node]


# ---------------------------------------------------------------------------


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    pos: np.ndarray
    count: np.ndarray
    unknown_left: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())


@dataclass
class RandomForest:
    trees: list
    features: list
    config: ForestConfig
    unknown_seen: int = 0

    @property
    def is_cat(self):
        return np.array([f.categorical for f in self.features], dtype=np.bool_)


def tree_seed(seed, index) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0] % (2**31 - 1))


def fit_forest(X: pd.DataFrame, y, config: ForestConfig = ForestConfig()) -> RandomForest:
    """Bootstrap-aggregated Gini trees; deterministic in ``config.seed``."""
    y = np.asarray(y, dtype=bool)
    if len(X) != len(y) or len(y) < 2:
        raise ValidationError("X and y must have the same length >= 2")
    if y.all() or not y.any():
        raise SingleClassInput("both classes are required")
    specs = feature_specs(X)
    M, _ = to_matrix(X, specs)
    if np.isnan(M).any():
        raise ValidationError("features contain missing values")
    yf = y.astype(float)
    is_cat = np.array([s.categorical for s in specs], dtype=np.bool_)
    n_codes = np.array([max(1, len(s.categories)) for s in specs], dtype=np.int64)
    mtry = config.features_per_split(M.shape[1])
    n = len(y)
    trees = []
    for t in range(config.n_trees):
        ts = tree_seed(config.seed, t)
        if config.bootstrap:
            rows = np.random.default_rng(ts).integers(0, n, n).astype(np.int64)
        else:
            rows = np.arange(n, dtype=np.int64)
        parts = _grow(M, yf, rows, is_cat, n_codes, config.max_depth, config.min_samples_leaf, mtry, ts)
        trees.append(Tree(*parts))
    return RandomForest(trees, specs, config)


def predict_proba(forest: RandomForest, X: pd.DataFrame) -> np.ndarray:
    """Mean over trees of the leaf positive fraction."""
    M, unknown = to_matrix(X, forest.features)
    if unknown:
        forest.unknown_seen += unknown
        log.debug("%d unseen category cells routed to majority children", unknown)
    out = np.zeros(len(M))
    is_cat = forest.is_cat
    for t in forest.trees:
        _predict_tree(M, is_cat, t.feature, t.threshold, t.left, t.right, t.pos, t.count, t.unknown_left, out)
    return out / len(forest.trees)
