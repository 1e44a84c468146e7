import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from raresynth import tuner as T
from raresynth.errors import EmptySpace, UnknownKind, ValidationError

from . import oracles

QUAD = T.SearchSpace({"x": T.Uniform(0.0, 6.0)})


def quadratic(params, seed):
    return oracles.rescaled_quadratic(params["x"])


def test_spaces():
    tv = T.build_space("TVAE").parameters
    assert tv["epochs"] == T.IntRange(300, 6000)
    assert tv["embedding_dim"] == T.IntRange(8, 600) and tv["layer_width"] == T.IntRange(8, 600)
    assert tv["depth"] == T.Fixed(2)
    for kind in ("CTGAN", "CopulaGAN"):
        p = T.build_space(kind).parameters
        assert p["gen_lr"] == T.LogUniform(1e-5, 1e-3) == p["disc_lr"]
        assert p["layer_width"] == T.IntRange(128, 512)
    with pytest.raises(UnknownKind):
        T.build_space("GC")
    with pytest.raises(EmptySpace):
        T.SearchSpace({})
    with pytest.raises(ValidationError):
        T.IntRange(5, 5)


@pytest.mark.parametrize("kind", ["TVAE", "CTGAN"])
def test_suggestions_in_range(kind):
    space = T.build_space(kind)
    rng = np.random.default_rng(0)
    history = []
    for i in range(30):
        p = T.sample_uniform(space, rng)
        history.append(T.Trial(i, p, {}, float(rng.random()), 0))
    for i in range(1000):
        p = T.suggest(space, history if i % 2 else history[:5], rng)
        assert space.contains(p)
        assert p["depth"] == 2


def _trial(i, epochs, composite):
    return T.Trial(i, {"epochs": epochs, "embedding_dim": 64, "layer_width": 64, "depth": 2}, {}, composite, 0)


def test_suggest_follows_good_cluster():
    space = T.build_space("TVAE")
    rng = np.random.default_rng(1)
    # the top quarter sits near 4000; the rest cover the range evenly
    history = [_trial(i, int(rng.normal(4000, 150)), 0.9) for i in range(25)]
    history += [_trial(25 + i, int(e), 0.2) for i, e in enumerate(np.linspace(300, 6000, 75))]
    picks = [T.suggest(space, history, rng)["epochs"] for _ in range(100)]
    assert np.mean([3000 <= e <= 5000 for e in picks]) >= 0.8


def test_parzen_density_normalized():
    est = T.ParzenEstimator.fit([0.1, 2.0, 5.9, 6.0], 0.0, 6.0)
    total, _ = quad(lambda v: float(est.pdf(np.array([v]))[0]), 0.0, 6.0, points=[0.1, 2.0, 5.9], limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)
    empty = T.ParzenEstimator.fit([], 0.0, 6.0)
    assert empty.pdf(np.array([3.0]))[0] == pytest.approx(1 / 6)
    assert est.sigma == max(6 / math.sqrt(4), 6 / 50)


def test_gamma_one_uses_all_history():
    history = [T.Trial(i, {"x": float(i)}, {}, i / 10, 0) for i in range(6)]
    pair = T.fit_parzen(QUAD, history, gamma=1.0)
    assert sorted(pair.good["x"].mus.tolist()) == [0, 1, 2, 3, 4, 5]
    assert len(pair.bad["x"].mus) == 0


def test_quadratic_optimum():
    best, history = T.run_study(quadratic, QUAD, 50, seed=0)
    assert abs(best.params["x"] - 2) < 0.3
    assert len(history) == 50 and [t.index for t in history] == list(range(50))


def test_startup_is_uniform():
    _, history = T.run_study(quadratic, QUAD, 10, seed=3)
    rng = np.random.default_rng([3, 0, 0x7E])
    assert history[0].params == T.sample_uniform(QUAD, rng)


def test_single_trial():
    best, history = T.run_study(quadratic, QUAD, 1, seed=2)
    assert best is history[0]


def test_failures_score_zero():
    def flaky(params, seed):
        if params["x"] > 3:
            raise RuntimeError("diverged")
        return quadratic(params, seed)

    best, history = T.run_study(flaky, QUAD, 20, seed=4)
    failed = [t for t in history if t.error]
    assert failed and all(t.composite == 0.0 for t in failed)
    assert len(history) == 20 and best.error is None


def test_sub_scores_recompute_composite():
    scores = {"realism": 0.8, "marginal": 0.9, "bivariate": 0.7, "tatr_pr_auc": 0.4, "fidelity_f1": 0.6}
    best, _ = T.run_study(lambda p, s: scores, QUAD, 2, seed=0)
    assert best.composite == pytest.approx(0.6, abs=1e-12)


def test_study_determinism_and_resume(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    T.run_study(quadratic, QUAD, 14, seed=5, history_path=a)
    T.run_study(quadratic, QUAD, 6, seed=5, history_path=b)
    T.run_study(quadratic, QUAD, 14, seed=5, history_path=b)
    assert a.read_bytes() == b.read_bytes()
    rows = [json.loads(line) for line in a.read_text().splitlines()]
    assert len(rows) == 14 and "duration" not in rows[0]
    assert [t.to_dict() for t in T.load_history(a)] == rows
