"""Reversible transforms between mixed-type tables and dense matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import ndtr, ndtri

from . import schema as S
from .errors import SpanMismatch, UnknownCategory

STD_FLOOR = 1e-6
# component std floor relative to the column std; stops components
# collapsing onto repeated integer values
REL_STD_FLOOR = 0.03
K_MAX = 10
ALPHA_SCALE = 4.0


# ---------------------------------------------------------------------------
# Gaussian mixtures


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    @property
    def k(self) -> int:
        return len(self.weights)

    def log_joint(self, x) -> np.ndarray:
        """log(w_j N(x; mu_j, sd_j)) with shape (n, k)."""
        x = np.asarray(x, dtype=float)[:, None]
        z = (x - self.means) / self.stds
        return np.log(self.weights) - 0.5 * z**2 - np.log(self.stds) - 0.5 * np.log(2 * np.pi)

    def responsibilities(self, x) -> np.ndarray:
        lj = self.log_joint(x)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def to_dict(self):
        return {"weights": self.weights, "means": self.means, "stds": self.stds}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"]), np.asarray(d["means"]), np.asarray(d["stds"]))


def logsumexp(a, axis=-1, keepdims=False):
    """Row-wise log-sum-exp without scipy's dispatch overhead."""
    m = a.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.exp(a - m).sum(axis=axis, keepdims=True)) + m
    return out if keepdims else np.squeeze(out, axis=axis)


def _em(z, k, max_iter, tol):
    """EM on standardized data. Returns (weights, means, stds, ll_trace)."""
    n = len(z)
    means = np.quantile(z, (np.arange(k) + 0.5) / k)
    stds = np.full(k, max(z.std() / k, REL_STD_FLOOR))
    weights = np.full(k, 1.0 / k)
    trace = []
    for _ in range(max_iter):
        lj = np.log(weights) - 0.5 * ((z[:, None] - means) / stds) ** 2 - np.log(stds) - 0.5 * np.log(2 * np.pi)
        norm = logsumexp(lj, axis=1, keepdims=True)
        ll = float(norm.sum())
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol * n:
            break
        resp = np.exp(lj - norm)
        nk = resp.sum(axis=0) + 1e-300
        weights = nk / n
        means = (resp * z[:, None]).sum(axis=0) / nk
        var = (resp * (z[:, None] - means) ** 2).sum(axis=0) / nk
        stds = np.sqrt(np.maximum(var, REL_STD_FLOOR**2))
        weights = np.maximum(weights, 1e-300)
        weights = weights / weights.sum()
    return weights, means, stds, trace


def fit_gmm(values, k_max: int = K_MAX, max_iter: int = 200, tol: float = 1e-10,
            return_trace: bool = False):
    """Fit a 1-D Gaussian mixture by EM, choosing k in [1, k_max] by BIC."""
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if len(x) == 0:
        raise ValueError("cannot fit a mixture to an empty column")
    center = float(x.mean())
    scale = float(x.std())
    n_distinct = len(np.unique(x))
    if n_distinct == 1 or scale == 0:
        gmm = GaussianMixture(np.ones(1), np.array([center]), np.array([STD_FLOOR]))
        return (gmm, {1: [0.0]}) if return_trace else gmm
    z = (x - center) / scale
    n = len(z)
    best, best_bic, traces = None, np.inf, {}
    for k in range(1, min(k_max, n_distinct) + 1):
        w, m, s, trace = _em(z, k, max_iter, tol)
        traces[k] = trace
        bic = -2 * trace[-1] + (3 * k - 1) * np.log(n)
        if bic < best_bic - 1e-9:
            best, best_bic = (w, m, s), bic
    w, m, s = best
    order = np.argsort(m, kind="stable")
    gmm = GaussianMixture(w[order], m[order] * scale + center, np.maximum(s[order] * scale, STD_FLOOR))
    return (gmm, traces) if return_trace else gmm


def mode_specific_encode(x, gmm: GaussianMixture, rng) -> tuple[np.ndarray, np.ndarray]:
    """Encode values as (alpha, one-hot mode indicator).

    The mode is drawn in proportion to the component responsibilities,
    restricted to components whose 4-sigma window contains the value
    whenever such a component exists.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    resp = gmm.responsibilities(x)
    inside = np.abs(x[:, None] - gmm.means) <= ALPHA_SCALE * gmm.stds
    masked = np.where(inside, resp, 0.0)
    ok = masked.sum(axis=1) > 0
    resp = np.where(ok[:, None], masked, resp)
    resp = resp / resp.sum(axis=1, keepdims=True)
    cum = np.cumsum(resp, axis=1)
    u = rng.random(len(x))[:, None]
    mode = np.minimum((u > cum).sum(axis=1), gmm.k - 1)
    alpha = (x - gmm.means[mode]) / (ALPHA_SCALE * gmm.stds[mode])
    alpha = np.clip(alpha, -1.0, 1.0)
    beta = np.zeros((len(x), gmm.k))
    beta[np.arange(len(x)), mode] = 1.0
    if scalar:
        return float(alpha[0]), beta[0]
    return alpha, beta


def mode_specific_decode(alpha, beta, gmm: GaussianMixture):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    mode = np.argmax(beta, axis=-1)
    alpha = np.clip(alpha, -1.0, 1.0)
    out = alpha * ALPHA_SCALE * gmm.stds[mode] + gmm.means[mode]
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# one-hot


def onehot_encode(value, categories) -> np.ndarray:
    cats = list(categories)
    try:
        i = cats.index(value)
    except ValueError:
        raise UnknownCategory(f"{value!r} not in {cats[:10]}") from None
    v = np.zeros(len(cats))
    v[i] = 1.0
    return v


def onehot_decode(vector, categories):
    if len(vector) != len(categories):
        raise SpanMismatch(f"vector length {len(vector)} != {len(categories)} categories")
    return list(categories)[int(np.argmax(vector))]


# ---------------------------------------------------------------------------
# univariate CDFs


@dataclass(frozen=True)
class KdeMarginal:
    sample: np.ndarray
    bandwidth: float

    def to_dict(self):
        return {"sample": self.sample, "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["sample"]), float(d["bandwidth"]))


def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        return STD_FLOOR
    sigma = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(sigma, iqr / 1.34) if iqr > 0 else sigma
    return max(0.9 * spread * n ** (-0.2), STD_FLOOR)


def kde_fit(values) -> KdeMarginal:
    x = np.sort(np.asarray(values, dtype=float))
    if len(x) == 0:
        raise ValueError("empty sample")
    return KdeMarginal(x, silverman_bandwidth(x))


def kde_cdf(m: KdeMarginal, x):
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(len(xs))
    for lo in range(0, len(xs), 2048):
        chunk = xs[lo:lo + 2048]
        out[lo:lo + 2048] = ndtr((chunk[:, None] - m.sample[None, :]) / m.bandwidth).mean(axis=1)
    return float(out[0]) if np.ndim(x) == 0 else out


def kde_icdf(m: KdeMarginal, u, tol: float = 1e-9):
    """Invert the KDE CDF by bracketed bisection."""
    us = np.atleast_1d(np.asarray(u, dtype=float))
    h = m.bandwidth
    lo = np.full(len(us), m.sample[0] - 12 * h)
    hi = np.full(len(us), m.sample[-1] + 12 * h)
    # coarse grid bracket first
    grid = np.linspace(lo[0], hi[0], 257)
    gcdf = kde_cdf(m, grid)
    j = np.clip(np.searchsorted(gcdf, us), 1, len(grid) - 1)
    lo, hi = grid[j - 1], grid[j]
    width = hi[0] - lo[0]
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        c = kde_cdf(m, mid)
        below = c < us
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(np.abs(c - us) < tol) or np.all(hi - lo < width * 1e-15):
            break
    return float(mid[0]) if np.ndim(u) == 0 else mid


@dataclass(frozen=True)
class EmpiricalCdf:
    sample: np.ndarray

    def transform(self, x):
        xs = np.asarray(x, dtype=float)
        n = len(self.sample)
        r = np.searchsorted(self.sample, xs, side="right")
        r = np.clip(r, 1, n)
        out = r / (n + 1)
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, u):
        us = np.asarray(u, dtype=float)
        n = len(self.sample)
        pos = np.clip(us * (n + 1), 1, n) - 1
        out = np.interp(pos, np.arange(n), self.sample)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self):
        return {"sample": self.sample}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["sample"]))


def empirical_cdf_fit(values) -> EmpiricalCdf:
    x = np.sort(np.asarray(values, dtype=float))
    if len(x) == 0:
        raise ValueError("empty sample")
    return EmpiricalCdf(x)


# ---------------------------------------------------------------------------
# table <-> matrix


@dataclass
class ColumnTransform:
    """How one column is embedded.

    ``spec`` is ``"mode"`` (alpha + mode one-hot, numeric/datetime) or
    ``"onehot"`` (categorical/boolean). ``cdf`` optionally maps numeric
    values to normal scores before mode-specific normalization.
    """

    column: str
    kind: str
    spec: str
    gmm: Optional[GaussianMixture] = None
    categories: Optional[list] = None
    bounds: Optional[tuple] = None
    cdf: Optional[object] = None

    @property
    def width(self) -> int:
        return 1 + self.gmm.k if self.spec == "mode" else len(self.categories)

    def to_dict(self):
        d = {"column": self.column, "kind": self.kind, "spec": self.spec}
        if self.gmm is not None:
            d["gmm"] = self.gmm.to_dict()
        if self.categories is not None:
            d["categories"] = list(self.categories)
        if self.bounds is not None:
            d["bounds"] = [float(b) for b in self.bounds]
        if self.cdf is not None:
            tag = "kde" if isinstance(self.cdf, KdeMarginal) else "empirical"
            d["cdf"] = {"type": tag, **self.cdf.to_dict()}
        return d

    @classmethod
    def from_dict(cls, d):
        cdf = None
        if "cdf" in d:
            c = dict(d["cdf"])
            tag = c.pop("type")
            cdf = KdeMarginal.from_dict(c) if tag == "kde" else EmpiricalCdf.from_dict(c)
        return cls(
            d["column"], d["kind"], d["spec"],
            gmm=GaussianMixture.from_dict(d["gmm"]) if "gmm" in d else None,
            categories=list(d["categories"]) if "categories" in d else None,
            bounds=tuple(d["bounds"]) if "bounds" in d else None,
            cdf=cdf,
        )


@dataclass
class Span:
    column: str
    offset: int
    width: int
    kind: str  # "alpha" | "mode" | "onehot"


@dataclass
class EncodedMatrix:
    data: np.ndarray
    spans: list = field(default_factory=list)


def _sort_key(v):
    return (type(v).__name__, v)


def category_list(series: pd.Series) -> list:
    return sorted(pd.unique(series.dropna()).tolist(), key=_sort_key)


def _to_normal_scores(cdf, x):
    if isinstance(cdf, KdeMarginal):
        u = kde_cdf(cdf, x)
    else:
        u = cdf.transform(x)
    return ndtri(np.clip(u, 1e-12, 1 - 1e-12))


def _from_normal_scores(cdf, z):
    u = ndtr(z)
    if isinstance(cdf, KdeMarginal):
        return kde_icdf(cdf, np.clip(u, 1e-12, 1 - 1e-12))
    return cdf.inverse(u)


def fit_transforms(table: pd.DataFrame, schema, k_max: int = K_MAX, cdf: Optional[str] = None) -> list:
    """One transform per column of ``schema``.

    ``cdf`` is ``None`` (plain mode-specific normalization), ``"empirical"``
    or ``"kde"`` (copula-style normal scores first).
    """
    out = []
    for col in schema:
        s = table[col.name]
        if col.kind in (S.NUMERIC, S.DATETIME):
            x = s.astype(float).to_numpy()
            wrap = None
            if cdf == "empirical":
                wrap = empirical_cdf_fit(x)
            elif cdf == "kde":
                wrap = kde_fit(x)
            fit_x = _to_normal_scores(wrap, x) if wrap is not None else x
            out.append(ColumnTransform(
                col.name, col.kind, "mode", gmm=fit_gmm(fit_x, k_max),
                bounds=(float(x.min()), float(x.max())), cdf=wrap,
            ))
        else:
            out.append(ColumnTransform(col.name, col.kind, "onehot", categories=category_list(s)))
    return out


def layout(transforms) -> list:
    spans, off = [], 0
    for t in transforms:
        if t.spec == "mode":
            spans.append(Span(t.column, off, 1, "alpha"))
            spans.append(Span(t.column, off + 1, t.gmm.k, "mode"))
        else:
            spans.append(Span(t.column, off, len(t.categories), "onehot"))
        off += t.width
    return spans


def encoded_width(transforms) -> int:
    return sum(t.width for t in transforms)


def encode_table(table: pd.DataFrame, transforms, rng=None) -> EncodedMatrix:
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(table)
    blocks = []
    for t in transforms:
        if t.column not in table.columns:
            raise SpanMismatch(f"table lacks column {t.column!r}")
        s = table[t.column]
        if t.spec == "mode":
            x = s.astype(float).to_numpy()
            if t.cdf is not None:
                x = _to_normal_scores(t.cdf, x)
            if n:
                alpha, beta = mode_specific_encode(x, t.gmm, rng)
            else:
                alpha, beta = np.zeros(0), np.zeros((0, t.gmm.k))
            blocks += [alpha[:, None], beta]
        else:
            index = {c: i for i, c in enumerate(t.categories)}
            codes = []
            for v in s.tolist():
                if v not in index:
                    raise UnknownCategory(f"{v!r} not a category of {t.column!r}")
                codes.append(index[v])
            oh = np.zeros((n, len(t.categories)))
            oh[np.arange(n), codes] = 1.0
            blocks.append(oh)
    data = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return EncodedMatrix(data, layout(transforms))


def decode_matrix(matrix, transforms) -> pd.DataFrame:
    data = matrix.data if isinstance(matrix, EncodedMatrix) else np.asarray(matrix)
    if data.ndim != 2 or data.shape[1] != encoded_width(transforms):
        raise SpanMismatch(f"matrix width {data.shape} != {encoded_width(transforms)}")
    cols, off = {}, 0
    for t in transforms:
        if t.spec == "mode":
            alpha = data[:, off]
            beta = data[:, off + 1: off + 1 + t.gmm.k]
            x = mode_specific_decode(alpha, beta, t.gmm) if len(data) else np.zeros(0)
            if t.cdf is not None:
                x = _from_normal_scores(t.cdf, x) if len(data) else x
            x = np.clip(x, *t.bounds)
            if t.kind == S.DATETIME:
                x = np.rint(x).astype("int64")
            cols[t.column] = x
        else:
            codes = np.argmax(data[:, off: off + len(t.categories)], axis=1)
            vals = [t.categories[c] for c in codes]
            cols[t.column] = pd.Series(vals, dtype=_dtype_for(t))
        off += t.width
    return pd.DataFrame(cols, columns=[t.column for t in transforms])


def _dtype_for(t: ColumnTransform):
    if t.kind == S.BOOLEAN:
        return bool
    if t.categories and all(isinstance(c, (int, np.integer)) and not isinstance(c, bool) for c in t.categories):
        return "int64"
    return object
