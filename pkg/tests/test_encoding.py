import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from raresynth import encoding as enc
from raresynth import schema as S
from raresynth.errors import SpanMismatch, UnknownCategory


def _single(mu, sd):
    return enc.GaussianMixture(np.ones(1), np.array([mu]), np.array([sd]))


def test_gmm_unimodal(rng):
    g = enc.fit_gmm(rng.normal(size=2000))
    assert g.k == 1
    assert abs(g.means[0]) < 0.1 and abs(g.stds[0] - 1) < 0.1


def test_gmm_bimodal(rng):
    x = np.r_[rng.normal(0, 0.1, 1000), rng.normal(10, 0.1, 1000)]
    g = enc.fit_gmm(x)
    assert g.k == 2
    assert np.allclose(g.means, [0, 10], atol=0.2)


def test_gmm_constant():
    g = enc.fit_gmm(np.full(50, 3.0))
    assert g.k == 1 and g.weights[0] == 1.0 and g.means[0] == 3.0


def test_em_log_likelihood_non_decreasing(rng):
    x = np.r_[rng.normal(0, 1, 300), rng.normal(6, 2, 300)]
    _, traces = enc.fit_gmm(x, k_max=4, return_trace=True)
    for trace in traces.values():
        assert np.all(np.diff(trace) >= -1e-8)


def test_alpha_examples(rng):
    g = _single(10, 2)
    alpha, beta = enc.mode_specific_encode(10.0, g, rng)
    assert alpha == 0.0 and beta.tolist() == [1.0]
    assert enc.mode_specific_encode(18.0, g, rng)[0] == 1.0
    assert enc.mode_specific_encode(30.0, g, rng)[0] == 1.0
    assert enc.mode_specific_decode(-1.0, [1.0], _single(5, 1)) == 1.0
    assert enc.mode_specific_decode(0.5, [1.0], _single(0, 2)) == 4.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50))
def test_mode_round_trip(x):
    g = enc.GaussianMixture(np.array([0.5, 0.5]), np.array([-10.0, 10.0]), np.array([5.0, 4.0]))
    alpha, beta = enc.mode_specific_encode(x, g, np.random.default_rng(0))
    m = int(np.argmax(beta))
    if abs(x - g.means[m]) <= 4 * g.stds[m]:
        assert enc.mode_specific_decode(alpha, beta, g) == pytest.approx(x, abs=1e-9)


def test_onehot():
    cats = ["A", "B", "C"]
    assert enc.onehot_encode("B", cats).tolist() == [0, 1, 0]
    assert enc.onehot_decode([0.1, 0.7, 0.2], cats) == "B"
    assert enc.onehot_decode(enc.onehot_encode("C", cats), cats) == "C"
    with pytest.raises(UnknownCategory):
        enc.onehot_encode("D", cats)
    with pytest.raises(SpanMismatch):
        enc.onehot_decode([1, 0], cats)


def test_kde_cdf(rng):
    m = enc.kde_fit([-1.0, 1.0])
    assert enc.kde_cdf(m, 0.0) == pytest.approx(0.5, abs=1e-12)
    m = enc.kde_fit(rng.normal(size=2000))
    assert enc.kde_cdf(m, 1.0) == pytest.approx(0.841, abs=0.03)
    u = np.array([0.1, 0.5, 0.9])
    assert np.allclose(enc.kde_cdf(m, enc.kde_icdf(m, u)), u, atol=1e-8)


def test_empirical_cdf():
    e = enc.empirical_cdf_fit([10, 20, 30])
    assert e.transform(20) == 0.5
    assert e.inverse(0.5) == 20
    assert e.transform(5) == 0.25
    assert np.allclose(e.inverse(e.transform(np.array([10.0, 20.0, 30.0]))), [10, 20, 30])


def test_table_round_trip(corpus):
    t = corpus.diversions
    transforms = enc.fit_transforms(t, S.GENERATION_SCHEMA)
    m = enc.encode_table(t, transforms)
    expected = sum(1 + tr.gmm.k for tr in transforms if tr.spec == "mode") + sum(
        len(tr.categories) for tr in transforms if tr.spec == "onehot")
    assert m.data.shape == (len(t), expected) == (len(t), enc.encoded_width(transforms))
    back = enc.decode_matrix(m, transforms)
    for col in S.GENERATION_SCHEMA:
        if col.kind == S.NUMERIC:
            assert np.allclose(back[col.name], t[col.name], atol=1e-6), col.name
        else:
            assert back[col.name].tolist() == t[col.name].tolist(), col.name
    empty = enc.encode_table(t.iloc[:0], transforms)
    assert empty.data.shape == (0, expected)
    assert len(enc.decode_matrix(empty, transforms)) == 0


def test_copula_transforms_round_trip(corpus):
    t = corpus.diversions
    for cdf in ("empirical", "kde"):
        transforms = enc.fit_transforms(t, S.GENERATION_SCHEMA, cdf=cdf)
        back = enc.decode_matrix(enc.encode_table(t, transforms), transforms)
        assert np.allclose(back[S.TAXI_OUT], t[S.TAXI_OUT], atol=1e-3)


def test_decode_width_mismatch(corpus):
    transforms = enc.fit_transforms(corpus.diversions, S.GENERATION_SCHEMA)
    with pytest.raises(SpanMismatch):
        enc.decode_matrix(np.zeros((2, 3)), transforms)


def test_unknown_category_on_encode(corpus):
    transforms = enc.fit_transforms(corpus.diversions, S.GENERATION_SCHEMA)
    bad = corpus.diversions.iloc[:1].copy()
    bad[S.CARRIER] = "ZZ"
    with pytest.raises(UnknownCategory):
        enc.encode_table(bad, transforms)
