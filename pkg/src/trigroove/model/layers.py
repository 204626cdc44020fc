"""NumPy building blocks with explicit backward passes.

Each layer binds its parameters into a shared ParamStore at construction
and accumulates gradients there during backward. Forward caches live on
the layer instance; one forward/backward pair per loss evaluation.
The feed-forward nonlinearity is tanh so the whole loss surface is smooth,
which keeps finite-difference verification clean.
"""

from __future__ import annotations

import numpy as np

from .params import ParamStore

LN_EPS = 1e-5


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / (10000.0 ** (2 * (i // 2) / dim))
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(angle[:, 0::2])
    pe[:, 1::2] = np.cos(angle[:, 1::2])
    return pe


def softmax_last(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Linear:
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int,
                 rng: np.random.Generator, bias: bool = True):
        self.w = store.add(name + ".w", xavier(rng, d_in, d_out))
        self._gw = store.grads[name + ".w"]
        if bias:
            self.b = store.add(name + ".b", np.zeros(d_out))
            self._gb = store.grads[name + ".b"]
        else:
            self.b = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        y = x @ self.w
        return y + self.b if self.b is not None else y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x2 = self._x.reshape(-1, self.w.shape[0])
        dy2 = dy.reshape(-1, self.w.shape[1])
        self._gw += x2.T @ dy2
        if self.b is not None:
            self._gb += dy2.sum(axis=0)
        return dy @ self.w.T


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int):
        self.g = store.add(name + ".g", np.ones(dim))
        self.b = store.add(name + ".b", np.zeros(dim))
        self._gg = store.grads[name + ".g"]
        self._gb = store.grads[name + ".b"]

    def forward(self, x: np.ndarray) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
        self._sigma = np.sqrt(var + LN_EPS)
        self._xhat = (x - mu) / self._sigma
        return self._xhat * self.g + self.b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        ghat = dy * self.g
        m1 = ghat.mean(axis=-1, keepdims=True)
        m2 = (ghat * self._xhat).mean(axis=-1, keepdims=True)
        axes = tuple(range(dy.ndim - 1))
        self._gg += (dy * self._xhat).sum(axis=axes)
        self._gb += dy.sum(axis=axes)
        return (ghat - m1 - self._xhat * m2) / self._sigma


class SelfAttention:
    """Bidirectional multi-head self-attention (no mask: the grid is decoded
    in one shot, not autoregressively)."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 rng: np.random.Generator):
        self.heads = heads
        self.dim = dim
        self.d_head = dim // heads
        self.q = Linear(store, name + ".q", dim, dim, rng)
        # no key bias: softmax ignores constant per-row score shifts
        self.k = Linear(store, name + ".k", dim, dim, rng, bias=False)
        self.v = Linear(store, name + ".v", dim, dim, rng)
        self.o = Linear(store, name + ".o", dim, dim, rng)

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.d_head).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        b, h, t, d = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * d)

    def forward(self, x: np.ndarray) -> np.ndarray:
        q = self._split(self.q.forward(x))
        k = self._split(self.k.forward(x))
        v = self._split(self.v.forward(x))
        scale = 1.0 / np.sqrt(self.d_head)
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        attn = softmax_last(scores)
        ctx = attn @ v
        self._cache = (q, k, v, attn, scale)
        return self.o.forward(self._merge(ctx))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        q, k, v, attn, scale = self._cache
        dctx = self._split(self.o.backward(dy))
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        rowdot = (dattn * attn).sum(axis=-1, keepdims=True)
        dscores = (dattn - rowdot) * attn * scale
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q
        dx = self.q.backward(self._merge(dq))
        dx += self.k.backward(self._merge(dk))
        dx += self.v.backward(self._merge(dv))
        return dx


class FeedForward:
    def __init__(self, store: ParamStore, name: str, dim: int, ff_dim: int,
                 rng: np.random.Generator):
        self.lin1 = Linear(store, name + ".1", dim, ff_dim, rng)
        self.lin2 = Linear(store, name + ".2", ff_dim, dim, rng)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._h = np.tanh(self.lin1.forward(x))
        return self.lin2.forward(self._h)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dh = self.lin2.backward(dy)
        return self.lin1.backward(dh * (1.0 - self._h ** 2))


class Block:
    """Pre-norm residual block: x + attn(ln(x)), then x + ff(ln(x))."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 ff_dim: int, rng: np.random.Generator):
        self.ln1 = LayerNorm(store, name + ".ln1", dim)
        self.attn = SelfAttention(store, name + ".attn", dim, heads, rng)
        self.ln2 = LayerNorm(store, name + ".ln2", dim)
        self.ff = FeedForward(store, name + ".ff", dim, ff_dim, rng)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = x + self.attn.forward(self.ln1.forward(x))
        return x + self.ff.forward(self.ln2.forward(x))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx = dy + self.ln2.backward(self.ff.backward(dy))
        return dx + self.ln1.backward(self.attn.backward(dx))
