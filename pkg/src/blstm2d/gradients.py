"""Reverse-mode gradients for every layer, and a finite-difference checker."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as M
from .kernel import RandomSource
from .layers import LSTMCache, LSTMParams
from .optim import LossConfig, cross_entropy_loss


class ConsistencyError(ValueError):
    """Cache does not belong to the given parameters / example."""


class DeterminismError(RuntimeError):
    """The objective returned different values for identical inputs."""


@dataclass
class SparseRows:
    """Row-sparse gradient for the embedding table."""

    rows: np.ndarray
    values: np.ndarray
    shape: tuple

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, self.rows, self.values)
        return out


class GradientSet(dict):
    """Parameter name -> gradient; ``embed`` may be held as :class:`SparseRows`."""

    def dense(self, name: str) -> np.ndarray:
        g = self[name]
        return g.toarray() if isinstance(g, SparseRows) else g

    def to_dense(self) -> dict:
        return {k: self.dense(k) for k in self}


def reduce_gradients(sets, scale: float = 1.0) -> dict:
    """Sum gradient sets in the given order, then scale; returns dense arrays."""
    sets = list(sets)
    out = {}
    for name, g in sets[0].items():
        if isinstance(g, SparseRows):
            out[name] = np.zeros(g.shape)
        else:
            out[name] = np.zeros_like(g)
    for gs in sets:
        for name, g in gs.items():
            if isinstance(g, SparseRows):
                np.add.at(out[name], g.rows, g.values)
            else:
                out[name] += g
    if scale != 1.0:
        for name in out:
            out[name] *= scale
    return out


# -- per-layer backward passes ---------------------------------------------

def lstm_backward(dH: np.ndarray, cache: LSTMCache, p: LSTMParams):
    """BPTT through one direction.  ``dH`` is indexed by input position."""
    h = p.hidden
    if cache.reverse:
        dH = dH[::-1]
    l = dH.shape[0]
    Wh = p.W[:, :h]
    G = cache.gates
    i, f, o, g = G[:, :h], G[:, h : 2 * h], G[:, 2 * h : 3 * h], G[:, 3 * h :]
    DA = np.empty((l, 4 * h))
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(l - 1, -1, -1):
        dh = dH[t] + dh_next
        tc = cache.tanh_c[t]
        dc = dc_next + dh * o[t] * (1.0 - tc * tc)
        da = DA[t]
        da[:h] = dc * g[t] * i[t] * (1.0 - i[t])
        da[h : 2 * h] = dc * cache.C_prev[t] * f[t] * (1.0 - f[t])
        da[2 * h : 3 * h] = dh * tc * o[t] * (1.0 - o[t])
        da[3 * h :] = dc * i[t] * (1.0 - g[t] * g[t])
        dc_next = dc * f[t]
        dh_next = Wh.T @ da
    dW = np.empty_like(p.W)
    dW[:, :h] = DA.T @ cache.H_prev
    dW[:, h:] = DA.T @ cache.X
    db = DA.sum(axis=0)
    dX = DA @ p.W[:, h:]
    if cache.reverse:
        dX = dX[::-1]
    return dW, db, dX


def maxpool_backward(dout: np.ndarray, idx: np.ndarray, shape) -> np.ndarray:
    """Route each pooled gradient to the winning entry (flat index) only."""
    dO = np.zeros(int(np.prod(shape)))
    np.add.at(dO, idx, dout)
    return dO.reshape(shape)


def maxpool1d_time_backward(dout: np.ndarray, arg: np.ndarray, shape) -> np.ndarray:
    dH = np.zeros(shape)
    dH[arg, np.arange(shape[1])] = dout
    return dH


def attention_backward(dr: np.ndarray, cache, projection: np.ndarray, score_vector: np.ndarray):
    H, Mx, alpha = cache.H, cache.M, cache.alpha
    dH = np.outer(alpha, dr)
    dalpha = H @ dr
    ds = alpha * (dalpha - alpha @ dalpha)
    dv = Mx.T @ ds
    dA = np.outer(ds, score_vector) * (1.0 - Mx * Mx)
    dP = dA.T @ H
    dH += dA @ projection
    return dH, dP, dv


def conv_backward(dZ: np.ndarray, windows: np.ndarray, filters: np.ndarray, in_shape):
    """Gradients of the narrow correlation w.r.t. filters, biases and input."""
    n, k, d = filters.shape
    _, r, c = dZ.shape
    dF = (dZ.reshape(n, r * c) @ windows).reshape(n, k, d)
    db = dZ.sum(axis=(1, 2))
    dH = np.zeros(in_shape)
    for a in range(k):
        for b in range(d):
            dH[a : a + r, b : b + c] += np.tensordot(filters[:, a, b], dZ, axes=1)
    return dF, db, dH


def activation_grad(name: str, out: np.ndarray) -> np.ndarray:
    """Derivative of the activation expressed through its output."""
    if name == "tanh":
        return 1.0 - out * out
    if name == "identity":
        return np.ones_like(out)
    if name == "sigmoid":
        return out * (1.0 - out)
    raise ValueError(f"unsupported activation {name!r}")


# -- whole-model backward --------------------------------------------------

def backward(params: M.ModelParams, target: int, cache: M.ForwardCache, lam: float = 0.0,
             corrupt: str | None = None):
    """Loss and exact gradient of the per-example objective.

    ``corrupt`` names a parameter whose gradient gets its sign flipped; it
    exists only so the gradient checker can be shown to catch a bad build.
    """
    arch = params.arch
    if cache.arch != arch or cache.probs is None:
        raise ConsistencyError("forward cache was produced for a different model")
    if cache.used:
        raise ConsistencyError("forward cache already consumed by a backward pass")
    if not 0 <= target < arch.n_classes:
        raise ConsistencyError(f"target {target} outside {arch.n_classes} classes")
    cache.used = True
    cfg = LossConfig(lam=lam)
    loss = cross_entropy_loss(cache.probs, target, params, cfg)

    m = arch.n_classes
    dz = cache.probs.copy()
    dz[target] -= 1.0
    dz /= m
    grads = GradientSet()
    grads["out.W"] = np.outer(dz, cache.h_star)
    grads["out.b"] = dz
    dhs = params["out.W"].T @ dz
    m_emb, m_blstm, m_pen = cache.masks
    if m_pen is not None:
        dhs = dhs * m_pen

    H = cache.H
    if arch.variant == "blstm":
        dH = maxpool1d_time_backward(dhs, cache.pool_idx, H.shape)
    elif arch.variant == "blstm-att":
        dH, grads["att.proj"], grads["att.v"] = attention_backward(
            dhs, cache.att, params["att.proj"], params["att.v"]
        )
    elif arch.variant == "blstm-2dpool":
        dH = maxpool_backward(dhs, cache.pool_idx, H.shape)
    else:
        O = cache.conv_out
        n = O.shape[0]
        per = dhs.reshape(n, -1)
        dO = np.stack([maxpool_backward(per[i], cache.pool_idx[i], O.shape[1:]) for i in range(n)])
        dZ = dO * activation_grad(arch.activation, O)
        grads["conv.filters"], grads["conv.b"], dH = conv_backward(
            dZ, cache.conv_windows, params["conv.filters"], H.shape
        )

    if m_blstm is not None:
        dH = dH * m_blstm
    cf, cb = cache.lstm
    grads["fwd.W"], grads["fwd.b"], dXf = lstm_backward(dH, cf, params.lstm("fwd"))
    grads["bwd.W"], grads["bwd.b"], dXb = lstm_backward(dH, cb, params.lstm("bwd"))
    dX = dXf + dXb
    if m_emb is not None:
        dX = dX * m_emb
    n_tok = cache.tokens.size
    grads["embed"] = SparseRows(cache.tokens.copy(), dX[:n_tok].copy(), params["embed"].shape)

    if lam:
        for name in cfg.regularized:
            if name in grads:
                grads[name] = grads[name] + 2.0 * lam * params[name]
    if corrupt is not None:
        grads[corrupt] = -grads.dense(corrupt)
    ordered = GradientSet((k, grads[k]) for k in params.tensors)
    return loss, ordered


def loss_and_grad(params, tokens, target, lam=0.0, mode="eval", rng=None, masks=None, corrupt=None):
    _, cache = M.forward(params, tokens, mode=mode, rng=rng, masks=masks)
    return backward(params, target, cache, lam=lam, corrupt=corrupt)


def objective(params, tokens, target, lam=0.0, masks=None) -> float:
    mode = "eval" if masks is None else "train"
    probs, _ = M.forward(params, tokens, mode=mode, masks=masks)
    return cross_entropy_loss(probs, target, params, LossConfig(lam=lam))


@dataclass
class GroupReport:
    name: str
    max_rel_error: float
    worst_index: tuple
    samples: int

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def finite_diff_check(params: M.ModelParams, tokens, target: int, *, lam: float = 0.0,
                      epsilon: float = 1e-5, samples_per_tensor: int = 20,
                      masks: tuple | None = None, rng: RandomSource | None = None,
                      corrupt: str | None = None) -> list:
    """Compare analytic gradients to central differences on sampled coordinates.

    Embedding coordinates are sampled from rows the example actually uses
    (other rows have zero gradient by construction and are checked
    separately by the test-suite).
    """
    rng = rng or RandomSource(0)
    J0 = objective(params, tokens, target, lam, masks)
    if objective(params, tokens, target, lam, masks) != J0:
        raise DeterminismError("objective differs between two identical evaluations")
    mode = "eval" if masks is None else "train"
    _, grads = loss_and_grad(params, tokens, target, lam=lam, mode=mode, masks=masks, corrupt=corrupt)

    work = params.copy()
    tok = M.prepare_tokens(tokens, params.arch)
    reports = []
    for name, theta in work.tensors.items():
        g = grads.dense(name)
        if name == "embed":
            rows = np.unique(tok)
            cand = [(int(r), c) for r in rows for c in range(theta.shape[1])]
        else:
            cand = list(np.ndindex(theta.shape))
        pick = rng.permutation(len(cand))[:samples_per_tensor]
        worst, worst_idx = 0.0, ()
        for j in pick:
            idx = tuple(cand[j])
            old = theta[idx]
            theta[idx] = old + epsilon
            jp = objective(work, tokens, target, lam, masks)
            theta[idx] = old - epsilon
            jm = objective(work, tokens, target, lam, masks)
            theta[idx] = old
            err = relative_error(g[idx], (jp - jm) / (2 * epsilon))
            if err > worst:
                worst, worst_idx = err, idx
        reports.append(GroupReport(name, worst, worst_idx, len(pick)))
    return reports
