"""Quality stages for synthetic diversion tables and the composite objective."""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import schema as S
from .classify import ForestConfig, binary_metrics, fit_forest, predict_proba, stratified_kfold
from .classify.forest import tree_seed
from .classify.metrics import BinaryMetrics, Confusion, balanced_accuracy, f1
from .data import (
    DELAY_THRESHOLD_MIN,
    FlightCorpus,
    reconstruct_relational,
    reject_invalid_routes,
    split_stratified,
    valid_route_mask,
)
from .errors import (
    AugmentationTooLarge,
    DegenerateVariance,
    EmptyColumn,
    EmptyTable,
    OutOfRangeInput,
    ValidationError,
)

log = logging.getLogger(__name__)

GRID = 16
TEST_FRACTION = 0.3
ENVELOPE = (0.8, 1.2)

_NUMERIC_KINDS = (S.NUMERIC, S.DATETIME)


def _schema_for(table, schema):
    if schema is not None:
        return tuple(schema)
    known = S.by_name(S.RAW_SCHEMA)
    if all(c in known for c in table.columns):
        return tuple(known[c] for c in table.columns)
    return S.infer_schema(table)


# ---------------------------------------------------------------------------
# realism and diversity


def realism_score(synthetic: pd.DataFrame, route_set) -> float:
    """Fraction of rows whose origin-destination pair is a known route."""
    if len(synthetic) == 0:
        raise EmptyTable("synthetic table is empty")
    return float(valid_route_mask(synthetic, route_set).mean())


def _frequency_matrix(real, other, schema):
    """Numeric view for PCA: numerics as floats, categoricals as real-data frequencies."""
    cols_r, cols_o = [], []
    for col in schema:
        r, o = real[col.name], other[col.name]
        if col.kind in _NUMERIC_KINDS:
            cols_r.append(r.astype(float).to_numpy())
            cols_o.append(o.astype(float).to_numpy())
        else:
            freq = r.value_counts(normalize=True).to_dict()
            cols_r.append(np.array([freq.get(v, 0.0) for v in r.tolist()]))
            cols_o.append(np.array([freq.get(v, 0.0) for v in o.tolist()]))
    return np.column_stack(cols_r), np.column_stack(cols_o)


def _grid_cells(points, lo, hi):
    width = np.where(hi > lo, hi - lo, 1.0)
    idx = np.floor((points - lo) / width * GRID).astype(int)
    inside = ((points >= lo) & (points <= hi)).all(axis=1)
    idx = np.clip(idx, 0, GRID - 1)
    return {(int(a), int(b)) for (a, b), ok in zip(idx, inside) if ok}


def diversity_pca(real: pd.DataFrame, synthetic: pd.DataFrame, schema=None):
    """Project both tables on the real data's first two principal axes.

    Returns ``(real_proj, synthetic_proj, coverage)`` where coverage is the
    share of occupied cells of a 16x16 grid over the real bounding box that
    also hold a synthetic point.
    """
    if len(real) < 3 or len(synthetic) < 3:
        raise ValidationError("diversity needs at least 3 rows per table")
    schema = _schema_for(real, schema)
    R, O = _frequency_matrix(real, synthetic, schema)
    mu, sd = R.mean(axis=0), R.std(axis=0)
    live = sd > 1e-12
    if not live.any():
        raise DegenerateVariance("all features are constant")
    R = (R[:, live] - mu[live]) / sd[live]
    O = (O[:, live] - mu[live]) / sd[live]
    _, _, vt = np.linalg.svd(R, full_matrices=False)
    axes = vt[:2].T
    # deterministic sign: largest loading positive
    signs = np.sign(axes[np.abs(axes).argmax(axis=0), np.arange(axes.shape[1])])
    axes = axes * np.where(signs == 0, 1.0, signs)
    if axes.shape[1] < 2:
        axes = np.column_stack([axes, np.zeros(len(axes))])
    pr, po = R @ axes, O @ axes
    lo, hi = pr.min(axis=0), pr.max(axis=0)
    real_cells = _grid_cells(pr, lo, hi)
    syn_cells = _grid_cells(po, lo, hi)
    return pr, po, len(real_cells & syn_cells) / len(real_cells)


def delayed_fraction(table: pd.DataFrame) -> float:
    if S.DEP_DELAY_LABEL in table.columns:
        lab = table[S.DEP_DELAY_LABEL].astype(bool).to_numpy()
    else:
        lab = table[S.DEP_DELTA].astype(float).to_numpy() > DELAY_THRESHOLD_MIN
    return float(lab.mean()) if len(lab) else 0.0


def class_balance_gap(real: pd.DataFrame, synthetic: pd.DataFrame) -> float:
    return abs(delayed_fraction(real) - delayed_fraction(synthetic))


# ---------------------------------------------------------------------------
# operational validity


@dataclass
class OperationalRecord:
    corr_real: float | None
    corr_syn: float | None
    corr_gap: float
    out_of_envelope_fraction: float
    zero_air_time_rows: int = 0
    degenerate: bool = False

    def to_dict(self):
        return {
            "corr_real": self.corr_real, "corr_syn": self.corr_syn,
            "corr_gap": self.corr_gap,
            "out_of_envelope_fraction": self.out_of_envelope_fraction,
            "zero_air_time_rows": self.zero_air_time_rows,
            "degenerate": self.degenerate,
        }


def _pearson(x, y):
    if len(x) < 2 or x.std() == 0 or y.std() == 0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def _speed_rows(table):
    air = table[S.AIR_TIME].astype(float).to_numpy()
    dist = table[S.DISTANCE].astype(float).to_numpy()
    ok = (air > 0) & np.isfinite(dist)
    return air, dist, ok


def operational_check(real: pd.DataFrame, synthetic: pd.DataFrame, envelope=ENVELOPE) -> OperationalRecord:
    """Air time versus distance: correlation gap and implied-speed envelope."""
    ra, rd, rok = _speed_rows(real)
    sa, sd, sok = _speed_rows(synthetic)
    zero = int((sa <= 0).sum())
    c_real = _pearson(ra[rok], rd[rok])
    c_syn = _pearson(sa[sok], sd[sok])
    degenerate = c_real is None or c_syn is None
    gap = 1.0 if degenerate else abs(c_real - c_syn)
    speed_r = rd[rok] / (ra[rok] / 60.0)
    speed_s = sd[sok] / (sa[sok] / 60.0)
    if len(speed_s) and len(speed_r):
        lo, hi = envelope[0] * speed_r.min(), envelope[1] * speed_r.max()
        outside = float(((speed_s < lo) | (speed_s > hi)).mean())
    else:
        outside = 0.0
    return OperationalRecord(c_real, c_syn, float(gap), outside, zero, degenerate)


# ---------------------------------------------------------------------------
# statistical similarity


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic by an ECDF scan of the pooled values."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise EmptyColumn("KS needs two non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.abs(fa - fb).max())


def tvd(a, b) -> float:
    """Total variation distance between two categorical samples."""
    a, b = pd.Series(list(a), dtype=object), pd.Series(list(b), dtype=object)
    if len(a) == 0 or len(b) == 0:
        raise EmptyColumn("TVD needs two non-empty samples")
    p = a.value_counts(normalize=True)
    q = b.value_counts(normalize=True)
    p, q = p.align(q, fill_value=0.0)
    return float(0.5 * np.abs(p - q).sum())


def column_scores(real, synthetic, schema=None) -> dict:
    schema = _schema_for(real, schema)
    out = {}
    for col in schema:
        r, s = real[col.name].dropna(), synthetic[col.name].dropna()
        if len(r) == 0 or len(s) == 0:
            raise EmptyColumn(col.name)
        if col.kind in _NUMERIC_KINDS:
            out[col.name] = 1.0 - ks_statistic(r.astype(float), s.astype(float))
        else:
            out[col.name] = 1.0 - tvd(r, s)
    return out


def marginal_score(real, synthetic, schema=None) -> float:
    """Mean per-column similarity: 1 - KS for numerics, 1 - TVD otherwise."""
    return float(np.mean(list(column_scores(real, synthetic, schema).values())))


def _contingency(a_r, b_r, a_s, b_s) -> float:
    jr = pd.Series(list(zip(a_r, b_r)), dtype=object).value_counts(normalize=True)
    js = pd.Series(list(zip(a_s, b_s)), dtype=object).value_counts(normalize=True)
    jr, js = jr.align(js, fill_value=0.0)
    return float(1.0 - 0.5 * np.abs(jr - js).sum())


def _quartile_bins(real_values, values):
    edges = np.unique(np.quantile(real_values, [0.25, 0.5, 0.75]))
    return np.searchsorted(edges, values, side="right")


def pair_scores(real, synthetic, schema=None) -> tuple[dict, list]:
    """Per-pair similarity and the list of pairs skipped for zero variance."""
    schema = _schema_for(real, schema)
    if len(schema) < 2:
        raise ValidationError("bivariate score needs at least 2 columns")
    scores, skipped = {}, []
    for i in range(len(schema)):
        for j in range(i + 1, len(schema)):
            ci, cj = schema[i], schema[j]
            ni, nj = ci.kind in _NUMERIC_KINDS, cj.kind in _NUMERIC_KINDS
            ri, rj = real[ci.name], real[cj.name]
            si, sj = synthetic[ci.name], synthetic[cj.name]
            key = (ci.name, cj.name)
            if ni and nj:
                xr, yr = ri.astype(float).to_numpy(), rj.astype(float).to_numpy()
                xs, ys = si.astype(float).to_numpy(), sj.astype(float).to_numpy()
                pr, ps = _pearson(xr, yr), _pearson(xs, ys)
                if pr is None or ps is None:
                    skipped.append(key)
                    continue
                scores[key] = 1.0 - abs(pr - ps) / 2.0
                continue
            if ni:
                ri = _quartile_bins(ri.astype(float).to_numpy(), ri.astype(float).to_numpy())
                si = _quartile_bins(real[ci.name].astype(float).to_numpy(), si.astype(float).to_numpy())
            if nj:
                rj = _quartile_bins(rj.astype(float).to_numpy(), rj.astype(float).to_numpy())
                sj = _quartile_bins(real[cj.name].astype(float).to_numpy(), sj.astype(float).to_numpy())
            scores[key] = _contingency(list(ri), list(rj), list(si), list(sj))
    return scores, skipped


def bivariate_score(real, synthetic, schema=None) -> float:
    """Mean pair similarity over correlation and contingency pairs."""
    scores, skipped = pair_scores(real, synthetic, schema)
    if skipped:
        log.debug("skipped %d zero-variance pairs", len(skipped))
    if not scores:
        raise DegenerateVariance("no pair has usable variance")
    return float(np.mean(list(scores.values())))


# ---------------------------------------------------------------------------
# fidelity and utility


def _fit_predict(X_train, y_train, X_test, config):
    y_train = np.asarray(y_train, dtype=bool)
    if y_train.all() or not y_train.any():
        return np.full(len(X_test), float(y_train[0]))
    return predict_proba(fit_forest(X_train, y_train, config), X_test)


def _feature_frame(table, columns):
    X = table[columns].reset_index(drop=True).copy()
    known = S.by_name(S.RAW_SCHEMA)
    for c in columns:
        col = known.get(c)
        if col is not None and col.kind == S.BOOLEAN:
            X[c] = X[c].astype(bool).astype(float)
    return X


def fidelity_check(real: pd.DataFrame, synthetic: pd.DataFrame, k=5, seed=0, columns=None,
                   config: ForestConfig | None = None) -> tuple[float, float]:
    """Cross-validated real-versus-synthetic discriminator.

    Returns mean out-of-fold ``(f1, balanced_accuracy)`` with real as the
    positive class. Lower values mean the synthetic rows are harder to tell
    apart from real ones.
    """
    if len(real) == 0 or len(synthetic) == 0:
        raise EmptyTable("fidelity needs two non-empty tables")
    if columns is None:
        columns = [c for c in real.columns if c in synthetic.columns]
        columns = [c for c in columns if real[c].nunique(dropna=False) > 1 or synthetic[c].nunique(dropna=False) > 1]
    pooled = pd.concat([_feature_frame(real, columns), _feature_frame(synthetic, columns)], ignore_index=True)
    y = np.r_[np.ones(len(real), bool), np.zeros(len(synthetic), bool)]
    k = min(k, len(y))
    base = config or ForestConfig()
    f1s, bas = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        folds = stratified_kfold(y, k, seed)
    for i, test in enumerate(folds):
        if len(test) == 0:
            continue
        train = np.setdiff1d(np.arange(len(y)), test)
        cfg = ForestConfig(base.n_trees, base.max_depth, base.min_samples_leaf, base.max_features,
                           base.bootstrap, tree_seed(seed, i))
        p = _fit_predict(pooled.iloc[train], y[train], pooled.iloc[test], cfg)
        c = Confusion.from_predictions(y[test], p >= 0.5)
        f1s.append(f1(c))
        bas.append(balanced_accuracy(c))
    return float(np.mean(f1s)), float(np.mean(bas))


@dataclass
class UtilityResult:
    trtr: BinaryMetrics
    tatr: BinaryMetrics
    augmentation_size: int
    split_hash: str = ""

    def to_dict(self):
        return {"trtr": self.trtr.to_dict(), "tatr": self.tatr.to_dict(),
                "augmentation_size": self.augmentation_size}


def table_hash(table: pd.DataFrame) -> str:
    h = pd.util.hash_pandas_object(table.astype(str), index=False).to_numpy()
    return hashlib.sha256(h.tobytes()).hexdigest()


def real_split(corpus: FlightCorpus, seed, test_fraction=TEST_FRACTION):
    return split_stratified(corpus.full, S.DIVERSION, test_fraction, seed)


def utility_check(corpus: FlightCorpus, synthetic: pd.DataFrame, augmentation_size=None, seed=0,
                  test_fraction=TEST_FRACTION, config: ForestConfig | None = None,
                  split=None) -> UtilityResult:
    """Train-real and train-augmented forests, both scored on one real test split.

    ``synthetic`` must carry the prediction columns (reconstructed rows) and
    only positive labels; its first ``augmentation_size`` rows are added.
    """
    if augmentation_size is None:
        augmentation_size = len(synthetic)
    if augmentation_size < 0:
        raise ValidationError("augmentation_size must be >= 0")
    if augmentation_size > len(synthetic):
        raise AugmentationTooLarge(f"{augmentation_size} > {len(synthetic)} synthetic rows")
    aug = synthetic.iloc[:augmentation_size]
    if len(aug) and not aug[S.DIVERSION].astype(bool).all():
        raise ValidationError("synthetic augmentation rows must be diversions")
    train, test = split if split is not None else real_split(corpus, seed, test_fraction)
    cols = S.PREDICTION_COLUMNS
    cfg = config or ForestConfig(seed=seed)
    X_test = _feature_frame(test, cols)
    y_test = test[S.DIVERSION].astype(bool).to_numpy()
    y_train = train[S.DIVERSION].astype(bool).to_numpy()
    p_trtr = _fit_predict(_feature_frame(train, cols), y_train, X_test, cfg)
    if augmentation_size == 0:
        p_tatr = p_trtr
    else:
        X_aug = pd.concat([_feature_frame(train, cols), _feature_frame(aug, cols)], ignore_index=True)
        y_aug = np.r_[y_train, np.ones(augmentation_size, bool)]
        p_tatr = _fit_predict(X_aug, y_aug, X_test, cfg)
    return UtilityResult(
        binary_metrics(y_test, p_trtr), binary_metrics(y_test, p_tatr),
        int(augmentation_size), table_hash(test),
    )


# ---------------------------------------------------------------------------
# composite and report


def composite_score(realism, marginal, bivariate, tatr_pr_auc, fidelity_f1) -> float:
    vals = (realism, marginal, bivariate, tatr_pr_auc, fidelity_f1)
    for v in vals:
        if not (0.0 <= v <= 1.0):
            raise OutOfRangeInput(f"score {v!r} outside [0, 1]")
    return 0.25 * realism + 0.25 * (marginal + bivariate) / 2 + 0.25 * tatr_pr_auc + 0.25 * (1 - fidelity_f1)


@dataclass
class EvalReport:
    realism: float
    pca_coverage: float
    class_balance_gap: float
    operational: OperationalRecord
    marginal: float
    bivariate: float
    fidelity_f1: float
    fidelity_balanced_accuracy: float
    utility: UtilityResult
    composite: float
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "realism": self.realism,
            "diversity": {"pca_coverage": self.pca_coverage, "class_balance_gap": self.class_balance_gap},
            "operational": self.operational.to_dict(),
            "statistical": {"marginal": self.marginal, "bivariate": self.bivariate},
            "fidelity": {"f1": self.fidelity_f1, "balanced_accuracy": self.fidelity_balanced_accuracy},
            "utility": self.utility.to_dict(),
            "composite": self.composite,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def evaluate(corpus: FlightCorpus, synthetic: pd.DataFrame, seed=0, k=5, augmentation_size=None,
             test_fraction=TEST_FRACTION, envelope=ENVELOPE) -> EvalReport:
    """All quality stages for a sampled 14-column synthetic diversion table.

    Realism is measured on the raw sample; every later stage uses the rows
    that survive route rejection, with relational columns reconstructed.
    """
    if len(synthetic) == 0:
        raise EmptyTable("synthetic table is empty")
    realism = realism_score(synthetic, corpus.route_set)
    full = reconstruct_relational(synthetic, corpus)
    kept, n_rejected = reject_invalid_routes(full, corpus.route_set)
    if len(kept) < 3:
        raise EmptyTable(f"only {len(kept)} synthetic rows have a valid route")
    real = corpus.full.loc[corpus.full[S.DIVERSION].astype(bool)].reset_index(drop=True)
    gen = S.GENERATION_SCHEMA
    _, _, coverage = diversity_pca(real[S.GENERATION_COLUMNS], kept[S.GENERATION_COLUMNS], gen)
    gap = class_balance_gap(real, kept)
    oper = operational_check(real, kept, envelope)
    marg = marginal_score(real, kept, gen)
    biv = bivariate_score(real, kept, gen)
    fid_f1, fid_ba = fidelity_check(real[S.GENERATION_COLUMNS], kept[S.GENERATION_COLUMNS], k=k, seed=seed)
    if augmentation_size is None:
        augmentation_size = len(kept)
    util = utility_check(corpus, kept, min(augmentation_size, len(kept)), seed, test_fraction)
    comp = composite_score(realism, marg, biv, util.tatr.pr_auc, fid_f1)
    return EvalReport(
        realism, coverage, gap, oper, marg, biv, fid_f1, fid_ba, util, comp,
        notes={"rejected_rows": n_rejected, "kept_rows": len(kept)},
    )


# ---------------------------------------------------------------------------
# augmentation sweep


def synthesize_valid(model, corpus: FlightCorpus, n: int, seed, max_rounds=20) -> pd.DataFrame:
    """Sample until ``n`` rows with known routes are available, reconstructed."""
    from .generators import sample

    if n == 0:
        return reconstruct_relational(sample(model, 0, seed), corpus)
    parts, have = [], 0
    for r in range(max_rounds):
        want = max(n - have, 16)
        batch = sample(model, int(want * 1.25) + 1, tree_seed(seed, r))
        kept, _ = reject_invalid_routes(reconstruct_relational(batch, corpus), corpus.route_set)
        parts.append(kept)
        have += len(kept)
        if have >= n:
            break
    out = pd.concat(parts, ignore_index=True).iloc[:n].reset_index(drop=True)
    if len(out) < n:
        warnings.warn(f"only {len(out)} of {n} synthetic rows passed route rejection", stacklevel=2)
    return out


@dataclass
class SweepRow:
    size: int
    seed: int
    result: UtilityResult

    def to_dict(self):
        return {
            "size": self.size,
            "trtr_pr_auc": self.result.trtr.pr_auc, "tatr_pr_auc": self.result.tatr.pr_auc,
            "trtr_mcc": self.result.trtr.mcc_normalized, "tatr_mcc": self.result.tatr.mcc_normalized,
            "seed": self.seed,
        }


SWEEP_COLUMNS = ["size", "trtr_pr_auc", "tatr_pr_auc", "trtr_mcc", "tatr_mcc", "seed"]


def class_balance_point(corpus: FlightCorpus, seed=0, test_fraction=TEST_FRACTION) -> int:
    """Augmentation size at which training positives equal training negatives."""
    train, _ = real_split(corpus, seed, test_fraction)
    y = train[S.DIVERSION].astype(bool)
    return int((~y).sum() - y.sum())


def augmentation_sweep(corpus: FlightCorpus, model, sizes, seeds=(0,), config=None) -> list:
    """Utility at each augmentation size; a fresh synthetic draw per (seed, size)."""
    sizes = [int(s) for s in sizes]
    if sizes != sorted(sizes):
        raise ValidationError("sizes must be ascending")
    rows = []
    for seed in seeds:
        split = real_split(corpus, seed)
        for size in sizes:
            syn = synthesize_valid(model, corpus, size, tree_seed(seed, size))
            res = utility_check(corpus, syn, min(size, len(syn)), seed, config=config, split=split)
            rows.append(SweepRow(size, int(seed), res))
    return rows


def sweep_frame(rows) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in rows], columns=SWEEP_COLUMNS)
