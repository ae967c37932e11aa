"""Training loop with dev-based model selection, evaluation and analyses."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as D
from . import metrics
from .checkpoint import Checkpoint, architecture
from .config import RunConfig
from .gradients import backward, reduce_gradients
from .kernel import RandomSource
from .model import ConfigError, ModelParams, forward, init_params
from .optim import AdaDeltaState, LossConfig, adadelta_update, l2_term

log = logging.getLogger(__name__)

# RandomSource sub-stream keys
_DEV_SPLIT, _EMBED, _INIT, _DROPOUT, _CV = 1, 2, 3, 4, 5


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.train_loss!r}\t{self.dev_metric!r}"


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_metric: float | None = None
    covered: int = 0
    final_params: ModelParams | None = None

    def log_text(self) -> str:
        return "".join(r.line() + "\n" for r in self.history)


@dataclass
class Corpus:
    train: list
    dev: list
    labels: D.LabelMap
    vocab: D.Vocabulary


def load_corpus(cfg: RunConfig, train_examples=None, labels=None) -> Corpus:
    """Read train/dev files (or take pre-read examples) and build the vocabulary."""
    if train_examples is None:
        if cfg.train is None:
            raise ConfigError("no training corpus given")
        train_examples, labels = D.parse_dataset(cfg.train, cfg.lowercase, max_len=cfg.max_len)
    if cfg.dev is not None:
        # dev labels must already occur in training data
        dev, _ = D.parse_dataset(cfg.dev, cfg.lowercase, labels=labels, frozen_labels=True,
                                 max_len=cfg.max_len)
        train = train_examples
    else:
        split = D.make_splits(train_examples, "dev", cfg.dev_fraction,
                              RandomSource(cfg.seed).spawn(_DEV_SPLIT))
        train, dev = split.train, split.dev
    vocab = D.build_vocab(train)
    return Corpus(train, dev, labels, vocab)


def resolve_seq_len(cfg: RunConfig, examples) -> RunConfig:
    """Fix the padded input length used by the 2-D variants."""
    if cfg.variant not in ("blstm-2dpool", "blstm-2dcnn"):
        return cfg.replace(seq_len=None)
    if cfg.seq_len is not None:
        return cfg
    longest = max(len(e.tokens) for e in examples)
    need = cfg.pool[0] if cfg.variant == "blstm-2dpool" else cfg.filter[0] + cfg.pool[0] - 1
    return cfg.replace(seq_len=max(longest, need))


def encode(examples, vocab: D.Vocabulary):
    return [(vocab.encode(e.tokens), e.label) for e in examples]


def predict_all(params: ModelParams, encoded) -> np.ndarray:
    return np.array([int(np.argmax(forward(params, toks)[0])) for toks, _ in encoded], dtype=np.int64)


def _example_step(params, toks, target, lam, rng):
    _, cache = forward(params, toks, mode="train", rng=rng)
    return backward(params, target, cache, lam=lam)


def train(cfg: RunConfig, corpus: Corpus | None = None, on_epoch=None) -> TrainResult:
    """Run ``cfg.epochs`` epochs of AdaDelta; keep the best-dev parameters."""
    corpus = corpus or load_corpus(cfg)
    cfg = resolve_seq_len(cfg, corpus.train)
    root = RandomSource(cfg.seed)
    vocab, labels = corpus.vocab, corpus.labels
    if len(labels) < 2:
        raise ConfigError("training corpus has fewer than two labels")
    arch = architecture(cfg, len(vocab), len(labels))

    covered = 0
    table = None
    if cfg.embeddings:
        if not Path(cfg.embeddings).exists():
            raise FileNotFoundError(cfg.embeddings)
        table, covered = D.load_pretrained(cfg.embeddings, vocab, cfg.d_w, root.spawn(_EMBED))
        log.info("pretrained vectors cover %d of %d tokens", covered, len(vocab))
    params = init_params(arch, root.spawn(_INIT), table)
    state = AdaDeltaState.for_params(params, cfg.rho, cfg.eps, cfg.lr)

    train_enc = encode(corpus.train, vocab)
    dev_enc = encode(corpus.dev, vocab)
    dev_gold = np.array([y for _, y in dev_enc], dtype=np.int64)

    best = params.copy()
    best_metric, best_epoch = None, 0
    history = []
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 0 else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = D.epoch_order(len(train_enc), cfg.seed, epoch)
            losses = []
            for b, start in enumerate(range(0, len(order), cfg.batch_size)):
                idx = order[start : start + cfg.batch_size]
                rngs = [root.spawn(_DROPOUT, epoch, b, j) for j in range(len(idx))]
                jobs = [(params, *train_enc[i], cfg.lam, r) for i, r in zip(idx, rngs)]
                if pool is None:
                    results = [_example_step(*j) for j in jobs]
                else:
                    # map() yields in submission order, so the reduction order is fixed
                    results = list(pool.map(lambda j: _example_step(*j), jobs))
                losses.extend(loss for loss, _ in results)
                grads = reduce_gradients((g for _, g in results), scale=1.0 / len(results))
                adadelta_update(params, grads, state)
            if dev_enc:
                dev_metric = metrics.score(cfg.metric, dev_gold, predict_all(params, dev_enc))
            else:
                dev_metric = float("nan")
            rec = EpochRecord(epoch, float(np.mean(losses)), dev_metric)
            history.append(rec)
            if on_epoch is not None:
                on_epoch(rec)
            if best_metric is None or dev_metric > best_metric:
                best_metric, best_epoch = dev_metric, epoch
                best = params.copy()
    finally:
        if pool is not None:
            pool.shutdown()
    # worker count is a runtime knob, not part of the model
    ckpt = Checkpoint(cfg.replace(workers=0), vocab, labels, best)
    return TrainResult(ckpt, history, best_epoch, best_metric, covered, params)


@dataclass
class Evaluation:
    score: float
    gold: np.ndarray
    pred: np.ndarray
    probs: np.ndarray
    loss: float


def read_eval_corpus(ckpt: Checkpoint, path):
    """Test corpus parsed against the checkpoint's label set (unknown -> DataError)."""
    labels = D.LabelMap(list(ckpt.labels.names))
    examples, _ = D.parse_dataset(path, ckpt.config.lowercase, labels=labels, frozen_labels=True,
                                  max_len=ckpt.config.max_len)
    return examples


def evaluate(ckpt: Checkpoint, examples, metric: str = "accuracy") -> Evaluation:
    params = ckpt.params
    probs = np.array([forward(params, ckpt.vocab.encode(e.tokens))[0] for e in examples])
    gold = np.array([e.label for e in examples], dtype=np.int64)
    pred = probs.argmax(axis=1)
    data_loss = -np.log(np.maximum(probs[np.arange(len(gold)), gold], 1e-12)).mean() / probs.shape[1]
    loss = float(data_loss + l2_term(params, LossConfig(lam=ckpt.config.lam)))
    return Evaluation(metrics.score(metric, gold, pred), gold, pred, probs, loss)


@dataclass
class LengthRow:
    length: int
    count: int
    exact_accuracy: float  # sentences of exactly this length, mean over runs
    window_accuracy: float  # sentences within +-window, mean over runs
    runs: list

    def line(self) -> str:
        cells = [self.length, self.count, repr(self.exact_accuracy), repr(self.window_accuracy)]
        return "\t".join(str(c) for c in cells + [repr(r) for r in self.runs])


def analyze_length(checkpoints, examples, window: int = 2) -> list:
    """Accuracy against sentence length, averaged over one checkpoint per run.

    Each row covers one length present in ``examples``; lengths with no
    sentences are left out.
    """
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    lengths = np.array([len(e.tokens) for e in examples])
    correct = np.array([_correct(c, examples) for c in checkpoints])
    rows = []
    for l in sorted(set(lengths.tolist())):
        exact = lengths == l
        near = np.abs(lengths - l) <= window
        runs = [float(c[near].mean()) for c in correct]
        rows.append(LengthRow(l, int(exact.sum()), float(correct[:, exact].mean()),
                              float(np.mean(runs)), runs))
    return rows


def _correct(ckpt, examples) -> np.ndarray:
    ev = evaluate(ckpt, examples)
    return ev.pred == ev.gold


def sweep_feasible(cfg: RunConfig, c: int, p: int) -> bool:
    rows = cfg.seq_len - c + 1
    cols = cfg.hidden - c + 1
    return rows >= p and cols >= p


@dataclass
class SweepRow:
    filter_size: int
    pool_size: int
    dev_metric: float | None

    def line(self) -> str:
        v = "skipped" if self.dev_metric is None else repr(self.dev_metric)
        return f"{self.filter_size}\t{self.pool_size}\t{v}"


def sweep(cfg: RunConfig, sizes, corpus: Corpus | None = None, on_row=None) -> list:
    """Train one BLSTM-2DCNN per square (filter, pool) pair; report best dev metric."""
    corpus = corpus or load_corpus(cfg)
    base = cfg.replace(variant="blstm-2dcnn")
    if base.seq_len is None:
        base = base.replace(seq_len=max(len(e.tokens) for e in corpus.train))
    rows = []
    for c in sizes:
        for p in sizes:
            cell = base.replace(filter=(c, c), pool=(p, p))
            if not sweep_feasible(cell, c, p):
                row = SweepRow(c, p, None)
            else:
                row = SweepRow(c, p, train(cell, corpus).best_metric)
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return rows


@dataclass
class FoldResult:
    fold: int
    score: float


def cross_validate(cfg: RunConfig, examples, labels: D.LabelMap):
    """Train one model per fold; returns per-fold test scores, mean and std."""
    splits = D.make_splits(examples, "cv", cfg.cv, RandomSource(cfg.seed).spawn(_CV))
    results = []
    for split in splits:
        corpus = load_corpus(cfg.replace(dev=None), split.train, labels)
        res = train(cfg, corpus)
        results.append(FoldResult(split.fold, evaluate(res.checkpoint, split.test, cfg.metric).score))
    scores = np.array([r.score for r in results])
    return results, float(scores.mean()), float(scores.std())
