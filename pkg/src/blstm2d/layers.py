"""Forward passes for every layer used by the four model variants.

The public functions are pure.  The ``*_fwd`` helpers return an extra cache
object holding what the matching backward pass in :mod:`blstm2d.gradients`
needs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .kernel import RandomSource, ShapeError, apply_unary, sigmoid, softmax

# Gate blocks inside the stacked LSTM weight matrix, top to bottom.
GATE_ORDER = ("input", "forget", "output", "candidate")


class TokenLookupError(IndexError):
    """Token index outside the embedding table."""


@dataclass
class LSTMParams:
    """Stacked gate weights ``W`` (4h x (h + d_in)) acting on ``[h_prev, x_t]``."""

    W: np.ndarray
    bias: np.ndarray

    @property
    def hidden(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[1] - self.hidden


@dataclass
class LSTMState:
    c: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> "LSTMState":
        return cls(np.zeros(hidden), np.zeros(hidden))


@dataclass
class ConvLayerParams:
    filters: np.ndarray  # (n_filters, k, d)
    biases: np.ndarray  # (n_filters,)
    activation: str = "tanh"

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]


@dataclass
class AttentionParams:
    projection: np.ndarray  # (h, h)
    score_vector: np.ndarray  # (h,)


@dataclass
class SoftmaxParams:
    W: np.ndarray  # (m, dim h*)
    b: np.ndarray  # (m,)


# -- embedding -------------------------------------------------------------

def embed(tokens, table: np.ndarray) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    bad = np.flatnonzero((tokens < 0) | (tokens >= table.shape[0]))
    if bad.size:
        pos = int(bad[0])
        raise TokenLookupError(
            f"token index {int(tokens[pos])} at position {pos} outside table of {table.shape[0]} rows"
        )
    return table[tokens]


# -- LSTM ------------------------------------------------------------------

def _gates(a: np.ndarray, h: int):
    return (
        sigmoid(a[:h]),
        sigmoid(a[h : 2 * h]),
        sigmoid(a[2 * h : 3 * h]),
        np.tanh(a[3 * h :]),
    )


def lstm_step(x_t, prev: LSTMState, p: LSTMParams) -> LSTMState:
    x_t = np.asarray(x_t, dtype=np.float64)
    h = p.hidden
    if x_t.shape != (p.input_size,) or prev.h.shape != (h,) or prev.c.shape != (h,):
        raise ShapeError(
            f"lstm_step: x {x_t.shape}, state {prev.h.shape} do not fit W {p.W.shape}"
        )
    a = p.W @ np.concatenate([prev.h, x_t]) + p.bias
    i, f, o, g = _gates(a, h)
    c = f * prev.c + i * g
    return LSTMState(c=c, h=o * np.tanh(c))


@dataclass
class LSTMCache:
    X: np.ndarray  # inputs in processing order
    H_prev: np.ndarray  # h_{t-1} per processing step
    C_prev: np.ndarray
    gates: np.ndarray  # (l, 4h) post-activation
    tanh_c: np.ndarray
    reverse: bool


def lstm_fwd(X: np.ndarray, p: LSTMParams, reverse: bool = False):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("lstm_sequence needs a non-empty l x d_in matrix")
    h = p.hidden
    if X.shape[1] != p.input_size:
        raise ShapeError(f"input width {X.shape[1]} does not match LSTM input size {p.input_size}")
    if reverse:
        X = X[::-1]
    l = X.shape[0]
    Wh = p.W[:, :h]
    # input projection for every step at once; only the recurrent part loops
    A_in = X @ p.W[:, h:].T + p.bias
    H_prev = np.zeros((l, h))
    C_prev = np.zeros((l, h))
    gates = np.empty((l, 4 * h))
    tanh_c = np.empty((l, h))
    out = np.empty((l, h))
    h_t = np.zeros(h)
    c_t = np.zeros(h)
    for t in range(l):
        H_prev[t] = h_t
        C_prev[t] = c_t
        a = A_in[t] + Wh @ h_t
        g = gates[t]
        g[: 3 * h] = sigmoid(a[: 3 * h])
        g[3 * h :] = np.tanh(a[3 * h :])
        c_t = g[h : 2 * h] * c_t + g[:h] * g[3 * h :]
        tanh_c[t] = np.tanh(c_t)
        h_t = g[2 * h : 3 * h] * tanh_c[t]
        out[t] = h_t
    cache = LSTMCache(X, H_prev, C_prev, gates, tanh_c, reverse)
    if reverse:
        out = out[::-1]
    return np.ascontiguousarray(out), cache


def lstm_sequence(X, p: LSTMParams, direction: str = "forward") -> np.ndarray:
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    return lstm_fwd(X, p, reverse=direction == "backward")[0]


def blstm_fwd(X, p_fwd: LSTMParams, p_bwd: LSTMParams):
    if p_fwd.hidden != p_bwd.hidden:
        raise ShapeError(f"hidden size mismatch: {p_fwd.hidden} vs {p_bwd.hidden}")
    Hf, cf = lstm_fwd(X, p_fwd, reverse=False)
    Hb, cb = lstm_fwd(X, p_bwd, reverse=True)
    return Hf + Hb, (cf, cb)


def blstm(X, p_fwd: LSTMParams, p_bwd: LSTMParams) -> np.ndarray:
    """Forward and backward LSTM outputs summed per position (width h, not 2h)."""
    return blstm_fwd(X, p_fwd, p_bwd)[0]


# -- 2D convolution --------------------------------------------------------

def conv_pre(H: np.ndarray, filters: np.ndarray, biases: np.ndarray):
    """Narrow 2-D correlation of every filter with ``H`` before the nonlinearity.

    Returns ``(Z, windows)`` with ``Z`` of shape (n, l-k+1, h-d+1) and the
    flattened windows reused by the backward pass.
    """
    H = np.asarray(H, dtype=np.float64)
    n, k, d = filters.shape
    l, w = H.shape
    if k > l or d > w:
        raise ShapeError(f"filter {k}x{d} larger than input {l}x{w}")
    r, c = l - k + 1, w - d + 1
    windows = sliding_window_view(H, (k, d)).reshape(r * c, k * d)
    Z = (windows @ filters.reshape(n, k * d).T).T.reshape(n, r, c) + biases[:, None, None]
    return Z, windows


def conv2d(H, filter, bias: float, f: str = "tanh") -> np.ndarray:
    filt = np.asarray(filter, dtype=np.float64)
    if filt.ndim != 2:
        raise ShapeError(f"filter must be 2-D, got shape {filt.shape}")
    Z, _ = conv_pre(H, filt[None], np.array([float(bias)]))
    return apply_unary(f, Z[0])


def conv_layer(H, p: ConvLayerParams) -> list:
    Z, _ = conv_pre(H, p.filters, p.biases)
    O = apply_unary(p.activation, Z)
    return [O[i] for i in range(p.n_filters)]


# -- pooling ---------------------------------------------------------------

def maxpool2d_fwd(O: np.ndarray, p1: int, p2: int):
    """Non-overlapping p1 x p2 max pooling; leftover rows/cols are dropped.

    Returns the pooled vector (row-major over windows) and, per output, the
    flat index into ``O`` of the winning entry.  Ties go to the first entry
    in row-major order inside the window.
    """
    O = np.asarray(O, dtype=np.float64)
    r, c = O.shape
    if p1 < 1 or p2 < 1 or p1 > r or p2 > c:
        raise ShapeError(f"pool {p1}x{p2} does not fit matrix {r}x{c}")
    R, C = r // p1, c // p2
    blocks = O[: R * p1, : C * p2].reshape(R, p1, C, p2).transpose(0, 2, 1, 3).reshape(R, C, p1 * p2)
    arg = blocks.argmax(axis=2)
    vals = np.take_along_axis(blocks, arg[..., None], axis=2)[..., 0]
    rows = np.arange(R)[:, None] * p1 + arg // p2
    cols = np.arange(C)[None, :] * p2 + arg % p2
    return vals.reshape(-1), (rows * c + cols).reshape(-1)


def maxpool2d(O, p1: int, p2: int) -> np.ndarray:
    return maxpool2d_fwd(O, p1, p2)[0]


def pooled_length(rows: int, cols: int, p1: int, p2: int) -> int:
    return (rows // p1) * (cols // p2)


def maxpool1d_time_fwd(H: np.ndarray):
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] < 1:
        raise ValueError("maxpool1d_time needs at least one row")
    arg = H.argmax(axis=0)
    return H[arg, np.arange(H.shape[1])], arg


def maxpool1d_time(H) -> np.ndarray:
    return maxpool1d_time_fwd(H)[0]


# -- attention -------------------------------------------------------------

@dataclass
class AttentionCache:
    H: np.ndarray
    M: np.ndarray  # tanh(H @ projection.T)
    alpha: np.ndarray


def attention_fwd(H: np.ndarray, p: AttentionParams):
    H = np.asarray(H, dtype=np.float64)
    h = H.shape[1]
    if p.projection.shape != (h, h) or p.score_vector.shape != (h,):
        raise ShapeError(
            f"attention params {p.projection.shape}/{p.score_vector.shape} do not fit width {h}"
        )
    M = np.tanh(H @ p.projection.T)
    alpha = softmax(M @ p.score_vector)
    return alpha @ H, AttentionCache(H, M, alpha)


def attention_weights(H, p: AttentionParams) -> np.ndarray:
    return attention_fwd(H, p)[1].alpha


def attention_pool(H, p: AttentionParams) -> np.ndarray:
    return attention_fwd(H, p)[0]


# -- dropout ---------------------------------------------------------------

def dropout_mask(shape, rate: float, rng: RandomSource) -> np.ndarray:
    """Multiplier array: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout(X, rate: float, mode: str, rng: RandomSource | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return X.copy()
    if mode != "train":
        raise ValueError(f"mode must be train or eval, got {mode!r}")
    return X * dropout_mask(X.shape, rate, rng)


# -- output ----------------------------------------------------------------

def softmax_classify(h_star, p: SoftmaxParams):
    h_star = np.asarray(h_star, dtype=np.float64)
    if h_star.shape != (p.W.shape[1],):
        raise ShapeError(f"h* of shape {h_star.shape} does not fit W_s {p.W.shape}")
    probs = softmax(p.W @ h_star + p.b)
    return probs, int(np.argmax(probs))
