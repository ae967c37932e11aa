"""Regularised cross-entropy objective and the AdaDelta update."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import REGULARIZED, ModelParams

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass
class LossConfig:
    lam: float = 1e-5
    regularized: tuple = REGULARIZED

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"L2 coefficient must be >= 0, got {self.lam}")


def l2_term(params, cfg: LossConfig) -> float:
    tensors = params.tensors if isinstance(params, ModelParams) else params
    return cfg.lam * float(sum(np.sum(np.square(tensors[n])) for n in cfg.regularized if n in tensors))


def cross_entropy_loss(probs, target: int, params, cfg: LossConfig) -> float:
    """``-(1/m) log p[target] + lam * sum(theta**2)`` with m the class count."""
    probs = np.asarray(probs, dtype=np.float64)
    m = probs.shape[0]
    if not 0 <= target < m:
        raise ValueError(f"target {target} outside {m} classes")
    p = probs[target]
    if p < PROB_FLOOR:
        log.warning("probability of target %d is %.3g; clamped to %g", target, p, PROB_FLOOR)
        p = PROB_FLOOR
    return -np.log(p) / m + l2_term(params, cfg)


@dataclass
class AdaDeltaState:
    sq_grad: dict = field(default_factory=dict)
    sq_delta: dict = field(default_factory=dict)
    rho: float = 0.95
    eps: float = 1e-6
    lr: float = 1.0

    @classmethod
    def for_params(cls, params: ModelParams, rho=0.95, eps=1e-6, lr=1.0) -> "AdaDeltaState":
        zeros = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        return cls({k: v.copy() for k, v in zeros.items()}, zeros, rho, eps, lr)


def adadelta_update(params: ModelParams, grads: dict, state: AdaDeltaState) -> None:
    """Apply one AdaDelta step in place to ``params`` and ``state``."""
    rho, eps = state.rho, state.eps
    for name, theta in params.tensors.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {theta.shape}")
        eg = state.sq_grad[name]
        ed = state.sq_delta[name]
        eg *= rho
        eg += (1.0 - rho) * g * g
        delta = -(np.sqrt(ed + eps) / np.sqrt(eg + eps)) * g
        ed *= rho
        ed += (1.0 - rho) * delta * delta
        theta += state.lr * delta
