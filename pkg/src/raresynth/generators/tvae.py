"""Tabular variational autoencoder trained on the evidence lower bound."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..encoding import ColumnTransform, decode_matrix, encode_table, fit_transforms, layout
from ..errors import NonFiniteLoss, ValidationError
from ..nn import AdamState, DenseNet, adam_step, log_softmax, softmax
from .base import DEPTH, MAX_BATCH, TRAIN_DTYPE, FittedModel, GeneratorSpec, empty_table, structure_of, table_schema

log = logging.getLogger(__name__)

SIGMA_RANGE = (0.01, 1.0)
_HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)


@dataclass
class TvaeState:
    encoder: DenseNet
    decoder: DenseNet
    log_sigma: np.ndarray  # one per scalar (alpha) span
    embedding_dim: int
    transforms: list
    loss_history: list

    def to_dict(self):
        return {
            "encoder": self.encoder.to_dict(), "decoder": self.decoder.to_dict(),
            "log_sigma": self.log_sigma, "embedding_dim": self.embedding_dim,
            "transforms": [t.to_dict() for t in self.transforms],
            "loss_history": np.asarray(self.loss_history, dtype=float),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            DenseNet.from_dict(d["encoder"]), DenseNet.from_dict(d["decoder"]),
            np.asarray(d["log_sigma"], dtype=float).reshape(-1), int(d["embedding_dim"]),
            [ColumnTransform.from_dict(t) for t in d["transforms"]],
            list(np.asarray(d["loss_history"]).reshape(-1)),
        )


def build_nets(data_dim, embedding_dim, width, rng):
    enc = DenseNet([data_dim] + [width] * DEPTH + [2 * embedding_dim], ["relu"] * DEPTH + ["linear"], rng)
    dec = DenseNet([embedding_dim] + [width] * DEPTH + [data_dim], ["relu"] * DEPTH + ["linear"], rng)
    return enc, dec


def kl_divergence(mu, logvar):
    """Per-row KL(N(mu, exp(logvar)) || N(0, I))."""
    return 0.5 * (mu**2 + np.exp(logvar) - logvar - 1.0).sum(axis=1)


def reconstruction(out, x, spans, log_sigma):
    """Per-row negative log-likelihood and its gradient w.r.t. decoder logits
    and log-sigma."""
    nll = np.zeros(len(x))
    g_out = np.zeros_like(out)
    g_sigma = np.zeros_like(log_sigma)
    a = 0
    for sp in spans:
        sl = slice(sp.offset, sp.offset + sp.width)
        if sp.kind == "alpha":
            pred = np.tanh(out[:, sp.offset])
            r = x[:, sp.offset] - pred
            var = np.exp(2 * log_sigma[a])
            nll += r**2 / (2 * var) + log_sigma[a] + _HALF_LOG_2PI
            g_out[:, sp.offset] = -(r / var) * (1 - pred**2)
            g_sigma[a] = (1.0 - r**2 / var).sum()
            a += 1
        else:
            lp = log_softmax(out[:, sl])
            nll -= (x[:, sl] * lp).sum(axis=1)
            g_out[:, sl] = softmax(out[:, sl]) * x[:, sl].sum(axis=1, keepdims=True) - x[:, sl]
    return nll, g_out, g_sigma


def elbo_loss(encoder, decoder, log_sigma, x, eps, spans):
    """Negative ELBO on a batch.

    Returns ``(loss, recon, kl, grads)`` with grads ordered as
    ``encoder.params + decoder.params + [log_sigma]``.
    """
    B = len(x)
    E = eps.shape[1]
    ce = encoder.forward(x)
    h = ce.output
    mu, logvar = h[:, :E], h[:, E:]
    std = np.exp(0.5 * logvar)
    z = mu + std * eps
    cd = decoder.forward(z)
    nll, g_out, g_sigma = reconstruction(cd.output, x, spans, log_sigma)
    kl = kl_divergence(mu, logvar)
    recon = float(nll.mean())
    kl_mean = float(kl.mean())
    dec_grads, gz = decoder.backward(cd, g_out / B)
    g_mu = gz + mu / B
    g_logvar = gz * eps * 0.5 * std + 0.5 * (np.exp(logvar) - 1.0) / B
    enc_grads, _ = encoder.backward(ce, np.hstack([g_mu, g_logvar]))
    return recon + kl_mean, recon, kl_mean, enc_grads + dec_grads + [g_sigma / B]


def fit_tvae(table: pd.DataFrame, spec: GeneratorSpec, schema=None) -> FittedModel:
    if spec.kind != "TVAE":
        raise ValidationError(f"fit_tvae got a {spec.kind} spec")
    hp = spec.hyperparameters
    epochs = int(hp["epochs"])
    emb = int(hp["embedding_dim"])
    width = int(hp["layer_width"])
    schema = table_schema(table, schema)
    if len(table) < 2:
        raise ValidationError("need at least 2 rows")
    rng = np.random.default_rng(spec.seed)
    transforms = fit_transforms(table, schema)
    data = encode_table(table, transforms, rng).data
    spans = layout(transforms)
    n, d = data.shape
    enc, dec = build_nets(d, emb, width, rng)
    enc.astype(TRAIN_DTYPE)
    dec.astype(TRAIN_DTYPE)
    data = data.astype(TRAIN_DTYPE)
    n_alpha = sum(1 for s in spans if s.kind == "alpha")
    log_sigma = np.full(n_alpha, np.log(0.1), dtype=TRAIN_DTYPE)
    params = enc.params + dec.params + [log_sigma]
    opt = AdamState(lr=float(hp.get("lr", 1e-3)))
    batch = min(MAX_BATCH, n)
    history = []
    lo, hi = np.log(SIGMA_RANGE[0]), np.log(SIGMA_RANGE[1])
    for epoch in range(epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            x = data[idx]
            eps = rng.standard_normal((len(idx), emb), dtype=TRAIN_DTYPE)
            loss, _, _, grads = elbo_loss(enc, dec, log_sigma, x, eps, spans)
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch, f"(batch at row {start})")
            adam_step(params, grads, opt)
            np.clip(log_sigma, lo, hi, out=log_sigma)
            total += loss * len(idx)
            seen += len(idx)
        history.append(total / seen)
    enc.astype(np.float64)
    dec.astype(np.float64)
    log_sigma = log_sigma.astype(np.float64)
    columns, bounds, cats = structure_of(table, schema)
    state = TvaeState(enc, dec, log_sigma, emb, transforms, [float(h) for h in history])
    return FittedModel(spec, state, columns, bounds, cats)


def sample_tvae(model: FittedModel, n: int, seed=0) -> pd.DataFrame:
    if n < 0:
        raise ValidationError("n must be >= 0")
    if n == 0:
        return empty_table(model)
    st: TvaeState = model.state
    rng = np.random.default_rng(seed)
    spans = layout(st.transforms)
    z = rng.standard_normal((n, st.embedding_dim))
    out = st.decoder(z)
    data = np.zeros_like(out)
    a = 0
    for sp in spans:
        sl = slice(sp.offset, sp.offset + sp.width)
        if sp.kind == "alpha":
            sigma = np.exp(st.log_sigma[a])
            data[:, sp.offset] = np.clip(np.tanh(out[:, sp.offset]) + sigma * rng.standard_normal(n), -1, 1)
            a += 1
        else:
            data[np.arange(n), sp.offset + np.argmax(out[:, sl], axis=1)] = 1.0
    return decode_matrix(data, st.transforms)[model.column_names]
