"""Model variants, their parameters, and the cached forward pass."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L
from .kernel import RandomSource, ShapeError, apply_unary, softmax, uniform_init

VARIANTS = ("blstm", "blstm-att", "blstm-2dpool", "blstm-2dcnn")

# weight tensors that enter the L2 penalty; biases and embeddings stay out
REGULARIZED = ("fwd.W", "bwd.W", "att.proj", "att.v", "conv.filters", "out.W")


class ConfigError(ValueError):
    """Invalid architecture or run configuration."""


@dataclass(frozen=True)
class Architecture:
    variant: str
    vocab_size: int
    d_w: int
    hidden: int
    n_classes: int
    n_filters: int = 100
    filter: tuple = (3, 3)
    pool: tuple = (2, 2)
    seq_len: int | None = None
    activation: str = "tanh"
    dropout: tuple = (0.5, 0.2, 0.4)  # embeddings, BLSTM output, penultimate

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")
        for r in self.dropout:
            if not 0.0 <= r < 1.0:
                raise ConfigError(f"dropout rate {r} outside [0, 1)")
        if self.is_2d:
            if self.seq_len is None:
                raise ConfigError(f"{self.variant} needs a fixed sequence length")
            rows, cols = self.map_shape
            p1, p2 = self.pool
            if rows < 1 or cols < 1:
                k, d = self.filter
                raise ConfigError(
                    f"filter {k}x{d} does not fit a {self.seq_len}x{self.hidden} BLSTM matrix"
                )
            if p1 > rows or p2 > cols:
                raise ConfigError(f"pool {p1}x{p2} larger than the {rows}x{cols} map it pools")

    @property
    def is_2d(self) -> bool:
        return self.variant in ("blstm-2dpool", "blstm-2dcnn")

    @property
    def map_shape(self) -> tuple:
        """Shape of the matrix that 2-D pooling runs over."""
        if self.variant == "blstm-2dcnn":
            k, d = self.filter
            return self.seq_len - k + 1, self.hidden - d + 1
        return self.seq_len, self.hidden

    @property
    def min_len(self) -> int:
        """Shortest BLSTM input the pooled path can accept."""
        if self.variant == "blstm-2dcnn":
            return self.filter[0] + self.pool[0] - 1
        if self.variant == "blstm-2dpool":
            return self.pool[0]
        return 1

    @property
    def feature_dim(self) -> int:
        if not self.is_2d:
            return self.hidden
        rows, cols = self.map_shape
        n = L.pooled_length(rows, cols, *self.pool)
        return n * self.n_filters if self.variant == "blstm-2dcnn" else n

    def shapes(self) -> dict:
        h, d_in = self.hidden, self.d_w
        s = {
            "embed": (self.vocab_size, self.d_w),
            "fwd.W": (4 * h, h + d_in),
            "fwd.b": (4 * h,),
            "bwd.W": (4 * h, h + d_in),
            "bwd.b": (4 * h,),
        }
        if self.variant == "blstm-att":
            s["att.proj"] = (h, h)
            s["att.v"] = (h,)
        if self.variant == "blstm-2dcnn":
            s["conv.filters"] = (self.n_filters, *self.filter)
            s["conv.b"] = (self.n_filters,)
        s["out.W"] = (self.n_classes, self.feature_dim)
        s["out.b"] = (self.n_classes,)
        return s


@dataclass
class ModelParams:
    arch: Architecture
    tensors: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.tensors[name]

    def names(self):
        return list(self.tensors)

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, {k: v.copy() for k, v in self.tensors.items()})

    def lstm(self, direction: str) -> L.LSTMParams:
        return L.LSTMParams(self.tensors[f"{direction}.W"], self.tensors[f"{direction}.b"])

    def l2(self) -> float:
        return float(sum(np.sum(self.tensors[n] ** 2) for n in REGULARIZED if n in self.tensors))


def _glorot(shape, fan_in, fan_out, rng):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, shape)


def init_params(arch: Architecture, rng: RandomSource, embeddings: np.ndarray | None = None) -> ModelParams:
    """Random initialisation; the forget-gate bias block starts at 1."""
    t = {}
    if embeddings is not None:
        if embeddings.shape != (arch.vocab_size, arch.d_w):
            raise ShapeError(f"embedding table {embeddings.shape} != {(arch.vocab_size, arch.d_w)}")
        t["embed"] = np.array(embeddings, dtype=np.float64)
    else:
        t["embed"] = uniform_init(arch.vocab_size, arch.d_w, -0.1, 0.1, rng)
    h = arch.hidden
    for direction in ("fwd", "bwd"):
        t[f"{direction}.W"] = _glorot((4 * h, h + arch.d_w), h + arch.d_w, h, rng)
        b = np.zeros(4 * h)
        b[h : 2 * h] = 1.0
        t[f"{direction}.b"] = b
    if arch.variant == "blstm-att":
        t["att.proj"] = _glorot((h, h), h, h, rng)
        t["att.v"] = rng.uniform(-0.1, 0.1, h)
    if arch.variant == "blstm-2dcnn":
        n, (k, d) = arch.n_filters, arch.filter
        t["conv.filters"] = _glorot((n, k, d), k * d, n * k * d // max(1, arch.pool[0] * arch.pool[1]), rng)
        t["conv.b"] = np.zeros(n)
    t["out.W"] = _glorot((arch.n_classes, arch.feature_dim), arch.feature_dim, arch.n_classes, rng)
    t["out.b"] = np.zeros(arch.n_classes)
    return ModelParams(arch, t)


@dataclass
class ForwardCache:
    """Everything one backward pass needs from one forward pass."""

    arch: Architecture
    tokens: np.ndarray  # real (unpadded, truncated) token ids
    masks: tuple  # dropout multipliers: embeddings, BLSTM output, penultimate
    lstm: tuple = ()
    H: np.ndarray | None = None  # BLSTM output after dropout
    pool_idx: np.ndarray | None = None
    att: L.AttentionCache | None = None
    conv_windows: np.ndarray | None = None
    conv_out: np.ndarray | None = None
    h_star: np.ndarray | None = None  # after penultimate dropout
    probs: np.ndarray | None = None
    used: bool = False


def prepare_tokens(tokens, arch: Architecture) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size == 0:
        raise ValueError("empty token sequence")
    if arch.seq_len is not None:
        tokens = tokens[: arch.seq_len]
    return tokens


def input_length(n_tokens: int, arch: Architecture) -> int:
    """Rows fed to the BLSTM: the fixed length for 2-D variants, else the tokens."""
    if arch.seq_len is not None and arch.is_2d:
        return arch.seq_len
    return max(n_tokens, arch.min_len)


def _masks(shapes, rates, mode, rng, masks):
    if masks is not None:
        return masks
    if mode == "eval":
        return (None, None, None)
    if rng is None:
        raise ValueError("training mode needs a RandomSource")
    return tuple(
        None if r == 0.0 else L.dropout_mask(s, r, rng) for s, r in zip(shapes, rates)
    )


def forward(params: ModelParams, tokens, mode: str = "eval", rng: RandomSource | None = None,
            masks: tuple | None = None):
    """Run one example; returns ``(probs, cache)``.

    ``mode='train'`` draws fresh dropout masks from ``rng``; passing ``masks``
    (e.g. from an earlier cache) replays them, which keeps the objective
    deterministic for gradient checking.
    """
    arch = params.arch
    tokens = prepare_tokens(tokens, arch)
    n_in = input_length(tokens.size, arch)
    h = arch.hidden
    feat = arch.feature_dim
    masks = _masks([(n_in, arch.d_w), (n_in, h), (feat,)], arch.dropout, mode, rng, masks)
    m_emb, m_blstm, m_pen = masks

    X = np.zeros((n_in, arch.d_w))
    X[: tokens.size] = L.embed(tokens, params["embed"])
    if m_emb is not None:
        X = X * m_emb
    H, lstm_cache = L.blstm_fwd(X, params.lstm("fwd"), params.lstm("bwd"))
    if m_blstm is not None:
        H = H * m_blstm

    cache = ForwardCache(arch, tokens, masks, lstm_cache, H)
    if arch.variant == "blstm":
        hs, cache.pool_idx = L.maxpool1d_time_fwd(H)
    elif arch.variant == "blstm-att":
        hs, cache.att = L.attention_fwd(H, L.AttentionParams(params["att.proj"], params["att.v"]))
    elif arch.variant == "blstm-2dpool":
        hs, cache.pool_idx = L.maxpool2d_fwd(H, *arch.pool)
    else:
        Z, cache.conv_windows = L.conv_pre(H, params["conv.filters"], params["conv.b"])
        O = apply_unary(arch.activation, Z)
        cache.conv_out = O
        pooled = [L.maxpool2d_fwd(O[i], *arch.pool) for i in range(O.shape[0])]
        hs = np.concatenate([v for v, _ in pooled])
        cache.pool_idx = np.stack([idx for _, idx in pooled])
    if m_pen is not None:
        hs = hs * m_pen
    cache.h_star = hs
    probs = softmax(params["out.W"] @ hs + params["out.b"])
    cache.probs = probs
    return probs, cache


def predict(params: ModelParams, tokens) -> tuple:
    probs, _ = forward(params, tokens, mode="eval")
    return probs, int(np.argmax(probs))
