"""Small dense networks with hand-written backward passes.

Only what the tabular generators need: fully connected layers, a handful
of activations, per-span output activations (tanh on scalar spans,
softmax or Gumbel-softmax on one-hot spans), Adam, and a
finite-difference gradient checker.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ShapeMismatch

GUMBEL_TAU = 0.2
LEAKY_SLOPE = 0.2
HIDDEN_ACTIVATIONS = ("relu", "leaky_relu", "tanh", "linear")
OUTPUT_ACTIVATIONS = HIDDEN_ACTIVATIONS + ("span", "gumbel_span")


def glorot(fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def gumbel_softmax(logits, tau, rng, noise=None):
    """Relaxed one-hot sample: softmax((logits + g) / tau), g ~ Gumbel(0, 1)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    logits = np.asarray(logits, dtype=float)
    if noise is None:
        u = rng.random(logits.shape)
        noise = -np.log(-np.log(u + 1e-20) + 1e-20)
    return softmax((logits + noise) / tau)


def _act(name, x):
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "leaky_relu":
        return np.where(x > 0, x, LEAKY_SLOPE * x)
    if name == "tanh":
        return np.tanh(x)
    return x


def _act_grad(name, pre, post, g):
    if name == "relu":
        return g * (pre > 0)
    if name == "leaky_relu":
        return g * np.where(pre > 0, 1.0, LEAKY_SLOPE)
    if name == "tanh":
        return g * (1.0 - post**2)
    return g


def span_activate(logits, spans, gumbel=False, tau=GUMBEL_TAU, rng=None, noise=None):
    """Apply tanh to scalar spans and (Gumbel-)softmax to one-hot spans.

    ``spans`` is a sequence of (offset, width, kind) with kind "alpha" for
    scalar spans. Returns (output, noise) where noise holds the Gumbel draws
    (reusable to replay the exact same forward pass).
    """
    out = np.empty_like(logits)
    drawn = {} if noise is None else noise
    for off, width, kind in spans:
        sl = slice(off, off + width)
        if kind == "alpha":
            out[:, sl] = np.tanh(logits[:, sl])
        elif gumbel:
            if off not in drawn:
                u = rng.random((logits.shape[0], width))
                drawn[off] = -np.log(-np.log(u + 1e-20) + 1e-20)
            out[:, sl] = softmax((logits[:, sl] + drawn[off]) / tau)
        else:
            out[:, sl] = softmax(logits[:, sl])
    return out, drawn


def span_backward(out, spans, g, gumbel=False, tau=GUMBEL_TAU):
    gin = np.empty_like(g)
    for off, width, kind in spans:
        sl = slice(off, off + width)
        y = out[:, sl]
        if kind == "alpha":
            gin[:, sl] = g[:, sl] * (1.0 - y**2)
        else:
            dot = (g[:, sl] * y).sum(axis=1, keepdims=True)
            gin[:, sl] = y * (g[:, sl] - dot)
            if gumbel:
                gin[:, sl] /= tau
    return gin


@dataclass
class Cache:
    inputs: list
    pre: list
    post: list
    noise: dict = field(default_factory=dict)

    @property
    def output(self):
        return self.post[-1]


class DenseNet:
    """Fully connected net; ``sizes`` = [in, h1, ..., out]."""

    def __init__(self, sizes, activations, rng, spans=None, tau=GUMBEL_TAU):
        if len(activations) != len(sizes) - 1:
            raise ShapeMismatch("need one activation per layer")
        for a in activations[:-1]:
            if a not in HIDDEN_ACTIVATIONS:
                raise ValueError(f"bad hidden activation {a!r}")
        if activations[-1] not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"bad output activation {activations[-1]!r}")
        self.sizes = list(sizes)
        self.activations = list(activations)
        self.spans = [tuple(s) for s in spans] if spans is not None else None
        self.tau = tau
        self.params = []
        for fi, fo in zip(sizes[:-1], sizes[1:]):
            self.params += [glorot(fi, fo, rng), np.zeros(fo)]

    @property
    def n_layers(self):
        return len(self.sizes) - 1

    @property
    def dtype(self):
        return self.params[0].dtype

    def astype(self, dtype):
        """Cast parameters in place (float32 for training speed); returns self."""
        self.params = [np.ascontiguousarray(p, dtype=dtype) for p in self.params]
        return self

    def forward(self, x, rng=None, noise=None) -> Cache:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ShapeMismatch(f"expected width {self.sizes[0]}, got {x.shape}")
        cache = Cache([], [], [])
        h = x
        for i, act in enumerate(self.activations):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            cache.inputs.append(h)
            pre = h @ W + b
            if act in ("span", "gumbel_span"):
                post, cache.noise = span_activate(
                    pre, self.spans, gumbel=act == "gumbel_span", tau=self.tau, rng=rng, noise=noise
                )
            else:
                post = _act(act, pre)
            cache.pre.append(pre)
            cache.post.append(post)
            h = post
        return cache

    def __call__(self, x, rng=None):
        return self.forward(x, rng).output

    def backward(self, cache: Cache, grad_out):
        """Return (parameter gradients in ``params`` order, input gradient)."""
        g = np.asarray(grad_out, dtype=self.dtype)
        if g.shape != cache.output.shape:
            raise ShapeMismatch(f"gradient {g.shape} vs output {cache.output.shape}")
        grads = [None] * len(self.params)
        for i in reversed(range(self.n_layers)):
            act = self.activations[i]
            if act in ("span", "gumbel_span"):
                g = span_backward(cache.post[i], self.spans, g, gumbel=act == "gumbel_span", tau=self.tau)
            else:
                g = _act_grad(act, cache.pre[i], cache.post[i], g)
            grads[2 * i] = cache.inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.params[2 * i].T
        return grads, g

    def to_dict(self):
        return {
            "sizes": self.sizes, "activations": self.activations,
            "spans": [list(s) for s in self.spans] if self.spans is not None else None,
            "tau": self.tau, "params": list(self.params),
        }

    @classmethod
    def from_dict(cls, d):
        net = cls.__new__(cls)
        net.sizes = [int(s) for s in d["sizes"]]
        net.activations = list(d["activations"])
        net.spans = [tuple(int(v) if i < 2 else v for i, v in enumerate(s)) for s in d["spans"]] if d["spans"] is not None else None
        net.tau = float(d["tau"])
        net.params = [np.asarray(p, dtype=float) for p in d["params"]]
        for i in range(net.n_layers):
            net.params[2 * i] = net.params[2 * i].reshape(net.sizes[i], net.sizes[i + 1])
        return net


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState):
    """In-place Adam update with bias correction; returns ``params``."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(grads) != len(params):
        raise ShapeMismatch("grads and params differ in length")
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not p.flags.c_contiguous:
            raise ValueError("parameters must be C-contiguous")
        _adam_kernel(p.reshape(-1), np.ascontiguousarray(g, dtype=p.dtype).reshape(-1),
                     m.reshape(-1), v.reshape(-1),
                     state.lr, state.beta1, state.beta2, state.eps, c1, c2)
    return params


@numba.njit(cache=True, fastmath=True)
def _adam_kernel(p, g, m, v, lr, b1, b2, eps, c1, c2):
    step = lr / c1
    scale = 1.0 / np.sqrt(c2)
    for i in range(p.shape[0]):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= step * mi / (np.sqrt(vi) * scale + eps)


# ---------------------------------------------------------------------------
# gradient checking


def check_gradients(loss_and_grads, params, eps=1e-4, max_entries=None, rng=None):
    """Max relative error between analytic and central-difference gradients.

    ``loss_and_grads()`` must read ``params`` (mutated in place here) and
    return ``(loss, grads)`` with grads aligned to params. Entries whose
    analytic and numeric values are both below 1e-7 are ignored.
    """
    _, analytic = loss_and_grads()
    analytic = [np.array(g, dtype=float, copy=True) for g in analytic]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort((rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False))
        af = a.reshape(-1)
        for j in idx:
            old = flat[j]
            flat[j] = old + eps
            lp = loss_and_grads()[0]
            flat[j] = old - eps
            lm = loss_and_grads()[0]
            flat[j] = old
            num = (lp - lm) / (2 * eps)
            denom = max(abs(num), abs(af[j]))
            if denom < 1e-7:
                continue
            worst = max(worst, abs(num - af[j]) / denom)
    return worst


def grad_check(net: DenseNet, loss, batch, eps=1e-4, seed=0):
    """Check ``net``'s backward pass against finite differences.

    ``loss(output) -> (value, d value / d output)``. Gumbel noise is drawn
    once and replayed so every evaluation sees the same forward pass.
    """
    noise = net.forward(batch, rng=np.random.default_rng(seed)).noise

    def f():
        cache = net.forward(batch, noise=noise)
        value, g = loss(cache.output)
        grads, _ = net.backward(cache, g)
        return value, grads

    return check_gradients(f, net.params, eps)
