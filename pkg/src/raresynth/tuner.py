"""Tree-structured Parzen Estimator search maximizing the composite score."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import EmptySpace, UnknownKind, ValidationError

log = logging.getLogger(__name__)

GAMMA = 0.25
N_STARTUP = 10
N_CANDIDATES = 24
SUB_SCORES = ("realism", "marginal", "bivariate", "tatr_pr_auc", "fidelity_f1")


# ---------------------------------------------------------------------------
# parameter types; each maps to an internal real interval where densities live


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"IntRange needs lo < hi, got {self.lo}, {self.hi}")

    @property
    def bounds(self):
        return float(self.lo) - 0.5, float(self.hi) + 0.5

    def to_internal(self, v):
        return float(v)

    def from_internal(self, u):
        return int(min(self.hi, max(self.lo, round(u))))


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"Uniform needs lo < hi, got {self.lo}, {self.hi}")

    @property
    def bounds(self):
        return float(self.lo), float(self.hi)

    def to_internal(self, v):
        return float(v)

    def from_internal(self, u):
        return float(min(self.hi, max(self.lo, u)))


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValidationError(f"LogUniform needs 0 < lo < hi, got {self.lo}, {self.hi}")

    @property
    def bounds(self):
        return math.log(self.lo), math.log(self.hi)

    def to_internal(self, v):
        return math.log(v)

    def from_internal(self, u):
        return float(min(self.hi, max(self.lo, math.exp(u))))


@dataclass(frozen=True)
class Fixed:
    value: object


@dataclass(frozen=True)
class SearchSpace:
    parameters: dict

    def __post_init__(self):
        if not self.parameters:
            raise EmptySpace("search space has no parameters")

    @property
    def free(self):
        return {k: p for k, p in self.parameters.items() if not isinstance(p, Fixed)}

    def contains(self, params) -> bool:
        for name, p in self.parameters.items():
            v = params.get(name)
            if isinstance(p, Fixed):
                if v != p.value:
                    return False
            elif not p.lo <= v <= p.hi:
                return False
        return True


def build_space(kind: str) -> SearchSpace:
    if kind == "TVAE":
        return SearchSpace({
            "epochs": IntRange(300, 6000),
            "embedding_dim": IntRange(8, 600),
            "layer_width": IntRange(8, 600),
            "depth": Fixed(2),
        })
    if kind in ("CTGAN", "CopulaGAN"):
        return SearchSpace({
            "epochs": IntRange(300, 6000),
            "gen_lr": LogUniform(1e-5, 1e-3),
            "disc_lr": LogUniform(1e-5, 1e-3),
            "layer_width": IntRange(128, 512),
            "depth": Fixed(2),
        })
    raise UnknownKind(f"no search space for {kind!r}")


# ---------------------------------------------------------------------------
# Parzen estimators


@dataclass
class ParzenEstimator:
    """Equal-weight mixture of Gaussians truncated to ``[lo, hi]``.

    With no observations it is the uniform density on the interval.
    """

    lo: float
    hi: float
    mus: np.ndarray
    sigma: float

    @classmethod
    def fit(cls, observations, lo, hi):
        obs = np.asarray(observations, dtype=float)
        rng_ = hi - lo
        sigma = max(rng_ / math.sqrt(max(len(obs), 1)), rng_ / 50.0)
        return cls(lo, hi, obs, sigma)

    def _mass(self):
        return ndtr((self.hi - self.mus) / self.sigma) - ndtr((self.lo - self.mus) / self.sigma)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        if len(self.mus) == 0:
            return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)
        z = (x[..., None] - self.mus) / self.sigma
        dens = np.exp(-0.5 * z**2) / (self.sigma * math.sqrt(2 * math.pi)) / self._mass()
        return np.where(inside, dens.mean(axis=-1), 0.0)

    def sample(self, rng, size):
        if len(self.mus) == 0:
            return rng.uniform(self.lo, self.hi, size)
        comp = rng.integers(0, len(self.mus), size)
        mu = self.mus[comp]
        a = ndtr((self.lo - mu) / self.sigma)
        b = ndtr((self.hi - mu) / self.sigma)
        u = a + rng.uniform(0, 1, size) * (b - a)
        x = mu + self.sigma * ndtri(np.clip(u, 1e-300, 1 - 1e-16))
        return np.clip(x, self.lo, self.hi)


@dataclass
class ParzenPair:
    good: dict
    bad: dict


def fit_parzen(space: SearchSpace, history, gamma=GAMMA) -> ParzenPair:
    """Split history at the gamma quantile of composite; fit per-parameter densities."""
    ranked = sorted(history, key=lambda t: (-t.composite, t.index))
    n_good = min(len(ranked), max(1, math.ceil(gamma * len(ranked))))
    good, bad = ranked[:n_good], ranked[n_good:]
    lpdf, gpdf = {}, {}
    for name, p in space.free.items():
        lo, hi = p.bounds
        lpdf[name] = ParzenEstimator.fit([p.to_internal(t.params[name]) for t in good], lo, hi)
        gpdf[name] = ParzenEstimator.fit([p.to_internal(t.params[name]) for t in bad], lo, hi)
    return ParzenPair(lpdf, gpdf)


def sample_uniform(space: SearchSpace, rng) -> dict:
    out = {}
    for name, p in space.parameters.items():
        if isinstance(p, Fixed):
            out[name] = p.value
        elif isinstance(p, IntRange):
            out[name] = int(rng.integers(p.lo, p.hi + 1))
        else:
            out[name] = p.from_internal(rng.uniform(*p.bounds))
    return out


def suggest(space: SearchSpace, history, rng, gamma=GAMMA, n_startup=N_STARTUP,
            n_candidates=N_CANDIDATES) -> dict:
    """Next parameters: uniform during startup, then the best l/g candidate per parameter."""
    if len(history) < n_startup:
        return sample_uniform(space, rng)
    pair = fit_parzen(space, history, gamma)
    out = {}
    for name, p in space.parameters.items():
        if isinstance(p, Fixed):
            out[name] = p.value
            continue
        l, g = pair.good[name], pair.bad[name]
        cand = l.sample(rng, n_candidates)
        score = np.log(np.maximum(l.pdf(cand), 1e-300)) - np.log(np.maximum(g.pdf(cand), 1e-300))
        out[name] = p.from_internal(float(cand[int(np.argmax(score))]))
    return out


# ---------------------------------------------------------------------------
# studies


@dataclass
class Trial:
    index: int
    params: dict
    scores: dict
    composite: float
    seed: int
    duration: float = 0.0
    error: str | None = None

    def to_dict(self):
        """Persisted record; wall-clock duration is kept out so histories are reproducible."""
        d = {"index": self.index, "params": self.params, "scores": self.scores,
             "composite": self.composite, "seed": self.seed}
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["index"]), dict(d["params"]), dict(d["scores"]), float(d["composite"]),
                   int(d["seed"]), float(d.get("duration", 0.0)), d.get("error"))


def trial_seed(study_seed, index) -> int:
    return int(np.random.SeedSequence([int(study_seed), int(index)]).generate_state(1)[0] % (2**31 - 1))


def _composite_of(scores):
    from .evaluation import composite_score

    return composite_score(*(scores[k] for k in SUB_SCORES))


FAILED_SCORES = {"realism": 0.0, "marginal": 0.0, "bivariate": 0.0, "tatr_pr_auc": 0.0, "fidelity_f1": 1.0}


def load_history(path) -> list:
    path = Path(path)
    if not path.exists():
        return []
    return [Trial.from_dict(json.loads(line)) for line in path.read_text().splitlines() if line.strip()]


def _append_line(path, trial: Trial):
    line = json.dumps(trial.to_dict(), sort_keys=True, allow_nan=False) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def run_study(objective, space: SearchSpace, n_trials: int, seed=0, history_path=None,
              strategy="tpe", gamma=GAMMA, n_startup=N_STARTUP, n_candidates=N_CANDIDATES):
    """Run trials sequentially; returns ``(best_trial, history)``.

    ``objective(params, seed)`` returns either a dict of the five sub-scores
    or a bare composite in [0, 1]. Exceptions score 0 and the study goes on.
    With ``history_path`` each trial is appended as a JSON line and an
    existing file is replayed, so an interrupted study resumes.
    """
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    if strategy not in ("tpe", "random"):
        raise ValidationError(f"unknown strategy {strategy!r}")
    history = load_history(history_path) if history_path else []
    if len(history) > n_trials:
        history = history[:n_trials]
    for index in range(len(history), n_trials):
        rng = np.random.default_rng([int(seed), index, 0x7E])
        if strategy == "random":
            params = sample_uniform(space, rng)
        else:
            params = suggest(space, history, rng, gamma, n_startup, n_candidates)
        tseed = trial_seed(seed, index)
        start = time.perf_counter()
        error = None
        try:
            result = objective(params, tseed)
            if isinstance(result, dict):
                scores = {k: float(result[k]) for k in SUB_SCORES}
                composite = _composite_of(scores)
            else:
                scores, composite = {}, float(result)
            if not math.isfinite(composite):
                raise ValueError("non-finite objective")
        except Exception as exc:  # noqa: BLE001 - any trial failure scores 0
            log.warning("trial %d failed: %s", index, exc)
            scores, composite, error = dict(FAILED_SCORES), 0.0, f"{type(exc).__name__}: {exc}"
        trial = Trial(index, params, scores, composite, tseed, time.perf_counter() - start, error)
        history.append(trial)
        if history_path:
            _append_line(history_path, trial)
        log.info("trial %d composite=%.4f params=%s", index, composite, params)
    best = max(history, key=lambda t: (t.composite, -t.index))
    return best, history


def generator_objective(corpus, kind, n_samples=1000, k=5, test_fraction=0.3, eval_seed=0):
    """Objective for a generator kind: fit on the diversions, sample, evaluate.

    The evaluation split and discriminator folds use ``eval_seed`` so trials
    differ only by their hyperparameters and generator seed.
    """
    from .evaluation import evaluate
    from .generators import GeneratorSpec, fit, sample

    def objective(params, seed):
        spec = GeneratorSpec(kind, dict(params), seed)
        model = fit(corpus.diversions, spec)
        syn = sample(model, n_samples, seed)
        rep = evaluate(corpus, syn, seed=eval_seed, k=k, test_fraction=test_fraction)
        return {
            "realism": rep.realism, "marginal": rep.marginal, "bivariate": rep.bivariate,
            "tatr_pr_auc": rep.utility.tatr.pr_auc, "fidelity_f1": rep.fidelity_f1,
        }

    return objective
