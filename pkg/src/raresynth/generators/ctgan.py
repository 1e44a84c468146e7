"""Conditional tabular GAN and its copula-transformed variant."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..encoding import ColumnTransform, decode_matrix, encode_table, fit_transforms, layout
from ..errors import ModeCollapseWarning, NonFiniteLoss, ValidationError
from ..nn import GUMBEL_TAU, AdamState, DenseNet, adam_step, log_softmax, softmax, span_activate, span_backward
from .base import DEPTH, MAX_BATCH, NOISE_DIM, TRAIN_DTYPE, FittedModel, GeneratorSpec, empty_table, structure_of, table_schema

log = logging.getLogger(__name__)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class CondColumn:
    column: str
    data_offset: int  # offset of the column's one-hot span in the encoded row
    cond_offset: int  # offset inside the condition vector
    width: int
    train_probs: np.ndarray  # proportional to log(1 + frequency)
    sample_probs: np.ndarray  # proportional to frequency

    def to_dict(self):
        return {
            "column": self.column, "data_offset": self.data_offset, "cond_offset": self.cond_offset,
            "width": self.width, "train_probs": self.train_probs, "sample_probs": self.sample_probs,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["column"], int(d["data_offset"]), int(d["cond_offset"]), int(d["width"]),
                   np.asarray(d["train_probs"]).reshape(-1), np.asarray(d["sample_probs"]).reshape(-1))


@dataclass
class GanState:
    generator: DenseNet
    discriminator: DenseNet
    transforms: list
    cond_columns: list
    loss_history: dict

    @property
    def cond_width(self):
        return sum(c.width for c in self.cond_columns)

    def to_dict(self):
        return {
            "generator": self.generator.to_dict(), "discriminator": self.discriminator.to_dict(),
            "transforms": [t.to_dict() for t in self.transforms],
            "cond_columns": [c.to_dict() for c in self.cond_columns],
            "loss_history": {k: np.asarray(v, dtype=float) for k, v in self.loss_history.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            DenseNet.from_dict(d["generator"]), DenseNet.from_dict(d["discriminator"]),
            [ColumnTransform.from_dict(t) for t in d["transforms"]],
            [CondColumn.from_dict(c) for c in d["cond_columns"]],
            {k: list(np.asarray(v).reshape(-1)) for k, v in d["loss_history"].items()},
        )


def condition_layout(transforms, data):
    cols, cond_off = [], 0
    for sp in layout(transforms):
        if sp.kind != "onehot":
            continue
        freq = data[:, sp.offset:sp.offset + sp.width].sum(axis=0)
        log_freq = np.log1p(freq)
        cols.append(CondColumn(
            sp.column, sp.offset, cond_off, sp.width,
            log_freq / log_freq.sum(), freq / freq.sum(),
        ))
        cond_off += sp.width
    return cols


def output_spans(transforms):
    return [(s.offset, s.width, "alpha" if s.kind == "alpha" else "onehot") for s in layout(transforms)]


def draw_conditions(cond_columns, n, rng, training=True, forced=None):
    """Return (cond matrix, column index per row, category index per row)."""
    width = sum(c.width for c in cond_columns)
    cond = np.zeros((n, width))
    if not cond_columns:
        return cond, np.zeros(n, int), np.zeros(n, int)
    if forced is not None:
        j, k = forced
        col_idx = np.full(n, j)
        cat_idx = np.full(n, k)
    else:
        col_idx = rng.integers(0, len(cond_columns), n)
        cat_idx = np.empty(n, dtype=int)
        for j, c in enumerate(cond_columns):
            rows = np.flatnonzero(col_idx == j)
            p = c.train_probs if training else c.sample_probs
            cat_idx[rows] = rng.choice(c.width, size=len(rows), p=p)
    offs = np.array([cond_columns[j].cond_offset for j in col_idx])
    cond[np.arange(n), offs + cat_idx] = 1.0
    return cond, col_idx, cat_idx


def discriminator_loss(D: DenseNet, real_in, fake_in):
    """-[mean log D(real) + mean log(1 - D(fake))] and its parameter grads."""
    cr = D.forward(real_in)
    cf = D.forward(fake_in)
    dr, df = cr.output[:, 0], cf.output[:, 0]
    loss = float(_softplus(-dr).mean() + _softplus(df).mean())
    gr, _ = D.backward(cr, ((_sigmoid(dr) - 1.0) / len(dr))[:, None])
    gf, _ = D.backward(cf, (_sigmoid(df) / len(df))[:, None])
    return loss, [a + b for a, b in zip(gr, gf)]


def minimax_value(D: DenseNet, real_in, fake_in):
    """The value function V(D, G) on a batch."""
    dr = D(real_in)[:, 0]
    df = D(fake_in)[:, 0]
    return float(-_softplus(-dr).mean() - _softplus(df).mean())


def condition_penalty(logits, cond_columns, col_idx, cat_idx):
    """Mean cross-entropy between the conditioned category and the generator's
    logits on that column's span; returns (value, grad w.r.t. logits)."""
    n = len(logits)
    g = np.zeros_like(logits)
    if not cond_columns or n == 0:
        return 0.0, g
    total = 0.0
    for j, c in enumerate(cond_columns):
        rows = np.flatnonzero(col_idx == j)
        if not len(rows):
            continue
        sl = slice(c.data_offset, c.data_offset + c.width)
        lp = log_softmax(logits[rows][:, sl])
        total -= lp[np.arange(len(rows)), cat_idx[rows]].sum()
        gs = softmax(logits[rows][:, sl])
        gs[np.arange(len(rows)), cat_idx[rows]] -= 1.0
        g[rows, sl] = gs / n
    return total / n, g


def generator_loss(G: DenseNet, D: DenseNet, noise, cond, col_idx, cat_idx, spans, cond_columns,
                   gumbel_noise=None, rng=None):
    """Non-saturating generator loss plus the condition penalty.

    Returns ``(loss, adversarial, penalty, grads for G.params, gumbel_noise)``.
    """
    cg = G.forward(np.hstack([noise, cond]))
    logits = cg.output
    fake, gumbel_noise = span_activate(logits, spans, gumbel=True, tau=G.tau, rng=rng, noise=gumbel_noise)
    cd = D.forward(np.hstack([fake, cond]))
    df = cd.output[:, 0]
    adv = float(_softplus(-df).mean())
    _, g_in = D.backward(cd, ((_sigmoid(df) - 1.0) / len(df))[:, None])
    g_fake = g_in[:, :fake.shape[1]]
    g_logits = span_backward(fake, spans, g_fake, gumbel=True, tau=G.tau)
    pen, g_pen = condition_penalty(logits, cond_columns, col_idx, cat_idx)
    grads, _ = G.backward(cg, g_logits + g_pen)
    return adv + pen, adv, pen, grads, gumbel_noise


def _real_rows_for(data, cond_columns, col_idx, cat_idx, rng, by_category):
    rows = np.empty(len(col_idx), dtype=int)
    for i, (j, k) in enumerate(zip(col_idx, cat_idx)):
        pool = by_category[j][k]
        rows[i] = pool[rng.integers(0, len(pool))]
    return data[rows]


def _entropy(series: pd.Series):
    p = series.value_counts(normalize=True).to_numpy()
    return float(-(p * np.log(p)).sum())


def fit_ctgan(table: pd.DataFrame, spec: GeneratorSpec, schema=None, cdf=None) -> FittedModel:
    """Adversarial training with training-by-sampling conditions."""
    if spec.kind not in ("CTGAN", "CopulaGAN"):
        raise ValidationError(f"fit_ctgan got a {spec.kind} spec")
    if cdf is None and spec.kind == "CopulaGAN":
        cdf = spec.hyperparameters.get("cdf", "empirical")
    hp = spec.hyperparameters
    epochs = int(hp["epochs"])
    width = int(hp["layer_width"])
    schema = table_schema(table, schema)
    if len(table) < 2:
        raise ValidationError("need at least 2 rows")
    rng = np.random.default_rng(spec.seed)
    transforms = fit_transforms(table, schema, cdf=cdf)
    data = encode_table(table, transforms, rng).data
    n, d = data.shape
    spans = output_spans(transforms)
    conds = condition_layout(transforms, data)
    cw = sum(c.width for c in conds)
    G = DenseNet([NOISE_DIM + cw] + [width] * DEPTH + [d], ["relu"] * DEPTH + ["linear"], rng, tau=GUMBEL_TAU)
    D = DenseNet([d + cw] + [width] * DEPTH + [1], ["leaky_relu"] * DEPTH + ["linear"], rng)
    G.astype(TRAIN_DTYPE)
    D.astype(TRAIN_DTYPE)
    opt_g = AdamState(lr=float(hp["gen_lr"]))
    opt_d = AdamState(lr=float(hp["disc_lr"]))
    by_category = [
        [np.flatnonzero(data[:, c.data_offset + k] > 0.5) for k in range(c.width)] for c in conds
    ]
    batch = min(MAX_BATCH, n)
    steps = max(1, n // batch)
    history = {"d_loss": [], "g_loss": [], "cond_loss": [], "value": []}
    for epoch in range(epochs):
        acc = np.zeros(4)
        for _ in range(steps):
            cond, ci, ki = draw_conditions(conds, batch, rng, training=True)
            real = _real_rows_for(data, conds, ci, ki, rng, by_category) if conds else data[rng.integers(0, n, batch)]
            z = rng.standard_normal((batch, NOISE_DIM))
            logits = G(np.hstack([z, cond]))
            fake, _ = span_activate(logits, spans, gumbel=True, rng=rng)
            real_in, fake_in = np.hstack([real, cond]), np.hstack([fake, cond])
            d_loss, d_grads = discriminator_loss(D, real_in, fake_in)
            adam_step(D.params, d_grads, opt_d)

            cond, ci, ki = draw_conditions(conds, batch, rng, training=True)
            z = rng.standard_normal((batch, NOISE_DIM))
            g_loss, _, pen, g_grads, _ = generator_loss(G, D, z, cond, ci, ki, spans, conds, rng=rng)
            adam_step(G.params, g_grads, opt_g)
            acc += (d_loss, g_loss, pen, -d_loss)
        acc /= steps
        if not np.all(np.isfinite(acc)):
            raise NonFiniteLoss(epoch, f"d={acc[0]} g={acc[1]}")
        for key, v in zip(history, acc):
            history[key].append(float(v))

    G.astype(np.float64)
    D.astype(np.float64)
    columns, bounds, cats = structure_of(table, schema)
    model = FittedModel(spec, GanState(G, D, transforms, conds, history), columns, bounds, cats)
    _warn_on_collapse(model, table, schema)
    return model


def _warn_on_collapse(model, table, schema):
    probe = sample_ctgan(model, 500, seed=model.spec.seed + 1)
    real_h, fake_h = [], []
    for c in schema:
        if c.name in model.categories and len(model.categories[c.name]) > 1:
            real_h.append(_entropy(table[c.name]))
            fake_h.append(_entropy(probe[c.name]))
    if real_h and sum(fake_h) < 0.1 * sum(real_h):
        msg = f"generated categorical entropy {sum(fake_h):.3f} < 10% of real {sum(real_h):.3f}"
        model.diagnostics["mode_collapse"] = msg
        warnings.warn(msg, ModeCollapseWarning, stacklevel=3)


def fit_copulagan(table: pd.DataFrame, spec: GeneratorSpec, schema=None, cdf=None) -> FittedModel:
    if spec.kind != "CopulaGAN":
        raise ValidationError(f"fit_copulagan got a {spec.kind} spec")
    return fit_ctgan(table, spec, schema, cdf=cdf or spec.hyperparameters.get("cdf", "empirical"))


def sample_ctgan(model: FittedModel, n: int, seed=0, condition=None) -> pd.DataFrame:
    """Sample rows; ``condition=(column, value)`` forces one category."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    if n == 0:
        return empty_table(model)
    st: GanState = model.state
    rng = np.random.default_rng(seed)
    forced = None
    if condition is not None:
        col, value = condition
        j = next((i for i, c in enumerate(st.cond_columns) if c.column == col), None)
        if j is None:
            raise ValidationError(f"{col!r} is not a discrete column")
        cats = next(t.categories for t in st.transforms if t.column == col)
        if value not in cats:
            raise ValidationError(f"{value!r} is not a category of {col!r}")
        forced = (j, cats.index(value))
    cond, _, _ = draw_conditions(st.cond_columns, n, rng, training=False, forced=forced)
    z = rng.standard_normal((n, NOISE_DIM))
    logits = st.generator(np.hstack([z, cond]))
    data = np.zeros_like(logits)
    for off, width, kind in output_spans(st.transforms):
        if kind == "alpha":
            data[:, off] = np.tanh(logits[:, off])
        else:
            u = rng.random((n, width))
            g = -np.log(-np.log(u + 1e-20) + 1e-20)
            data[np.arange(n), off + np.argmax(logits[:, off:off + width] + g, axis=1)] = 1.0
    return decode_matrix(data, st.transforms)[model.column_names]


sample_copulagan = sample_ctgan
