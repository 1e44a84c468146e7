import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from raresynth import data as D
from raresynth import evaluation as E
from raresynth import schema as S
from raresynth.errors import EmptyColumn, OutOfRangeInput
from raresynth.generators import sample

from . import oracles


# ---------------------------------------------------------------- realism / diversity

def test_realism_counts():
    routes = {(1, 2), (3, 4)}
    t = pd.DataFrame({S.ORIGIN_ID: [1, 1, 3, 5], S.DEST_ID: [2, 2, 4, 6]})
    assert E.realism_score(t, routes) == 0.75
    assert E.realism_score(t.iloc[:3], routes) == 1.0
    assert E.realism_score(t.iloc[3:], routes) == 0.0
    kept, n = D.reject_invalid_routes(t, routes)
    assert n == 1 and E.realism_score(kept, routes) == 1.0


def test_pca_coverage(corpus):
    real = corpus.diversions
    pr, po, cov = E.diversity_pca(real, real, S.GENERATION_SCHEMA)
    assert cov == 1.0 and pr.shape == (len(real), 2) and po.shape == (len(real), 2)
    one = pd.concat([real.iloc[[0]]] * 5, ignore_index=True)
    _, _, cov = E.diversity_pca(real, one, S.GENERATION_SCHEMA)
    occupied = len(E._grid_cells(pr, pr.min(axis=0), pr.max(axis=0)))
    assert cov == pytest.approx(1 / occupied)


def _delayed(frac, n=20):
    k = int(round(frac * n))
    return pd.DataFrame({S.DEP_DELAY_LABEL: [True] * k + [False] * (n - k)})


def test_class_balance_gap():
    assert E.class_balance_gap(_delayed(0.4), _delayed(0.4)) == 0.0
    assert E.class_balance_gap(_delayed(0.4), _delayed(0.65)) == pytest.approx(0.25)
    assert E.class_balance_gap(_delayed(0.4), _delayed(1.0)) == pytest.approx(0.6)


def test_operational(corpus):
    real = corpus.full.loc[corpus.full[S.DIVERSION]].reset_index(drop=True)
    rec = E.operational_check(real, real)
    assert rec.corr_gap == 0.0 and rec.out_of_envelope_fraction == 0.0
    halved = real.copy()
    halved[S.AIR_TIME] = halved[S.AIR_TIME] / 2
    rec = E.operational_check(real, halved)
    ok = real[S.AIR_TIME] > 0
    speed = real.loc[ok, S.DISTANCE] / (real.loc[ok, S.AIR_TIME] / 60)
    expected = ((2 * speed > 1.2 * speed.max()) | (2 * speed < 0.8 * speed.min())).mean()
    assert rec.out_of_envelope_fraction == pytest.approx(expected)
    single = E.operational_check(real, real.iloc[:1])
    assert single.degenerate and single.corr_gap == 1.0


# ---------------------------------------------------------------- statistical similarity

def test_ks_tvd_examples():
    assert E.ks_statistic([0, 0, 0, 0], [1, 1, 1, 1]) == 1.0
    assert E.tvd(["A", "B"], ["A", "A", "A", "B"]) == pytest.approx(0.25)
    with pytest.raises(EmptyColumn):
        E.ks_statistic([], [1.0])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=1, max_size=60),
       st.lists(st.integers(-5, 5), min_size=1, max_size=60))
def test_ks_tvd_match_brute_force(a, b):
    assert E.ks_statistic(a, b) == pytest.approx(oracles.ks_brute(a, b), abs=1e-12)
    assert E.tvd(a, b) == pytest.approx(oracles.tvd_brute(a, b), abs=1e-12)


def test_identical_tables_score_one(corpus):
    t = corpus.diversions
    assert E.marginal_score(t, t, S.GENERATION_SCHEMA) == 1.0
    assert E.bivariate_score(t, t, S.GENERATION_SCHEMA) == pytest.approx(1.0, abs=1e-12)


def _with_corr(rho, n=200, seed=0):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, n))
    u -= u.mean()
    v -= v.mean()
    v -= u * (u @ v) / (u @ u)
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    return pd.DataFrame({"x": u, "y": rho * u + np.sqrt(1 - rho**2) * v})


def test_pair_score_formula():
    scores, _ = E.pair_scores(_with_corr(0.8), _with_corr(0.6, seed=1))
    assert scores[("x", "y")] == pytest.approx(0.9, abs=1e-12)
    x = pd.Series(np.arange(10.0))
    scores, _ = E.pair_scores(pd.DataFrame({"x": x, "y": x}), pd.DataFrame({"x": x, "y": -x}))
    assert scores[("x", "y")] == pytest.approx(0.0, abs=1e-12)


def test_constant_pair_skipped():
    t = pd.DataFrame({"x": np.arange(5.0), "y": np.ones(5), "z": np.arange(5.0) ** 2})
    scores, skipped = E.pair_scores(t, t)
    assert ("x", "y") in skipped and ("x", "z") in scores


# ---------------------------------------------------------------- composite

def test_composite_examples():
    assert E.composite_score(1, 1, 1, 1, 0) == 1.0
    assert E.composite_score(0, 0, 0, 0, 1) == 0.0
    assert E.composite_score(0.8, 0.9, 0.7, 0.4, 0.6) == pytest.approx(0.6, abs=1e-12)
    with pytest.raises(OutOfRangeInput):
        E.composite_score(1.1, 0, 0, 0, 0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=5, max_size=5))
def test_composite_matches_literal(v):
    assert E.composite_score(*v) == pytest.approx(oracles.composite_literal(*v), abs=1e-12)
    assert 0.0 <= E.composite_score(*v) <= 1.0


# ---------------------------------------------------------------- fidelity / utility / report

def test_fidelity_shifted_copy_is_separable(corpus):
    real = corpus.diversions
    shifted = real.copy()
    shifted[S.TAXI_OUT] = shifted[S.TAXI_OUT] + 1000
    f1_shift, ba_shift = E.fidelity_check(real, shifted, seed=0)
    assert ba_shift >= 0.95 and f1_shift >= 0.95
    assert E.fidelity_check(real, shifted, seed=0) == (f1_shift, ba_shift)


def test_zero_augmentation_equals_trtr(corpus, gc_model):
    syn = E.synthesize_valid(gc_model, corpus, 50, seed=1)
    res = E.utility_check(corpus, syn, 0, seed=2)
    assert res.tatr == res.trtr


def test_utility_same_split(corpus, gc_model):
    syn = E.synthesize_valid(gc_model, corpus, 50, seed=1)
    a = E.utility_check(corpus, syn, 50, seed=3)
    _, test = E.real_split(corpus, 3)
    assert a.split_hash == E.table_hash(test)


def test_report_keys_and_bounds(corpus, gc_model):
    rep = E.evaluate(corpus, sample(gc_model, 300, seed=5), seed=0)
    d = json.loads(rep.to_json())
    assert list(d) == ["realism", "diversity", "operational", "statistical", "fidelity", "utility", "composite"]
    assert list(d["utility"]) == ["trtr", "tatr", "augmentation_size"]
    for v in (rep.realism, rep.pca_coverage, rep.marginal, rep.bivariate, rep.fidelity_f1, rep.composite):
        assert 0.0 <= v <= 1.0
    assert rep.composite == pytest.approx(oracles.composite_literal(
        rep.realism, rep.marginal, rep.bivariate, rep.utility.tatr.pr_auc, rep.fidelity_f1), abs=1e-12)


def test_sweep_shapes(corpus, gc_model):
    rows = E.augmentation_sweep(corpus, gc_model, [0], seeds=[0])
    assert len(rows) == 1 and rows[0].result.tatr == rows[0].result.trtr
    frame = E.sweep_frame(E.augmentation_sweep(corpus, gc_model, [10, 20], seeds=[0]))
    assert list(frame.columns) == E.SWEEP_COLUMNS and len(frame) == 2
    assert E.class_balance_point(corpus) > 0
