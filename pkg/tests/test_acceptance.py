"""Exit criteria; each test is one criterion and shows up in the summary."""
import itertools
import time

import numpy as np
import pytest

from blstm2d import checkpoint as C
from blstm2d import data as D
from blstm2d import layers as L
from blstm2d import metrics
from blstm2d import model as M
from blstm2d import training as T
from blstm2d.cli import GRADCHECK_DEFAULTS, gradcheck_report
from blstm2d.config import RunConfig
from blstm2d.kernel import RandomSource
from blstm2d.optim import AdaDeltaState, adadelta_update

from corpora import toy_binary, trec_like


def conv_oracle(H, F, b):
    k, d = F.shape
    r, c = H.shape[0] - k + 1, H.shape[1] - d + 1
    out = np.empty((r, c))
    for i in range(r):
        for j in range(c):
            out[i, j] = np.tanh(np.sum(F * H[i : i + k, j : j + d]) + b)
    return out


def pool_oracle(O, p1, p2):
    vals = []
    for i in range(0, O.shape[0] - p1 + 1, p1):
        for j in range(0, O.shape[1] - p2 + 1, p2):
            vals.append(O[i : i + p1, j : j + p2].max())
    return np.array(vals)


def check_tuple(H, k, d, p1, p2, rng):
    l, w = H.shape
    F = rng.uniform(-1, 1, (k, d))
    b = float(rng.uniform(-1, 1, 1)[0])
    O = L.conv2d(H, F, b, "tanh")
    assert np.max(np.abs(O - conv_oracle(H, F, b))) <= 1e-10
    pooled = L.maxpool2d(O, p1, p2)
    assert np.max(np.abs(pooled - pool_oracle(O, p1, p2))) <= 1e-10
    assert pooled.size == ((l - k + 1) // p1) * ((w - d + 1) // p2)


@pytest.mark.acceptance("gradient correctness: gradcheck, all four variants, < 1e-4, < 60 s")
def test_gradcheck_all_variants():
    start = time.perf_counter()
    cfg = RunConfig(**GRADCHECK_DEFAULTS)
    assert (cfg.hidden, cfg.d_w, cfg.n_filters, cfg.filter, cfg.pool) == (8, 8, 2, (2, 2), (2, 2))
    rows = gradcheck_report(cfg, M.VARIANTS, length=5, samples=20, epsilon=1e-5)
    elapsed = time.perf_counter() - start
    assert {v for v, _ in rows} == set(M.VARIANTS)
    worst = max(r.max_rel_error for _, r in rows)
    assert worst < 1e-4, [(v, r) for v, r in rows if not r.passed()]
    assert elapsed < 60


@pytest.mark.acceptance("conv2d / maxpool2d equal brute-force oracles to 1e-10; pooled length formula")
def test_conv_pool_oracles():
    rng = RandomSource(2024)
    # 500 random matrices up to 20x20, several random valid tuples each
    for _ in range(500):
        l, w = (int(x) for x in rng.generator.integers(1, 21, 2))
        H = rng.uniform(-2, 2, (l, w))
        for _ in range(3):
            k = int(rng.generator.integers(1, l + 1))
            d = int(rng.generator.integers(1, w + 1))
            p1 = int(rng.generator.integers(1, l - k + 2))
            p2 = int(rng.generator.integers(1, w - d + 2))
            check_tuple(H, k, d, p1, p2, rng)
    # every valid (k, d, p1, p2) on every matrix shape up to 6x6
    for l, w in itertools.product(range(1, 7), repeat=2):
        H = rng.uniform(-2, 2, (l, w))
        for k, d in itertools.product(range(1, l + 1), range(1, w + 1)):
            for p1, p2 in itertools.product(range(1, l - k + 2), range(1, w - d + 2)):
                check_tuple(H, k, d, p1, p2, rng)
    # pooled-length formula over every valid tuple on a 20x20 input
    for k, d in itertools.product(range(1, 21), repeat=2):
        r, c = 21 - k, 21 - d
        for p1, p2 in itertools.product(range(1, r + 1), range(1, c + 1)):
            assert L.maxpool2d(np.zeros((r, c)), p1, p2).size == (r // p1) * (c // p2)


@pytest.mark.acceptance("figure-1 shapes: 7x5 BLSTM matrix, 6x4 feature map, pooled length 6")
def test_figure_one_shapes():
    arch = M.Architecture("blstm-2dcnn", vocab_size=12, d_w=3, hidden=5, n_classes=2, n_filters=2,
                          filter=(2, 2), pool=(2, 2), seq_len=7)
    params = M.init_params(arch, RandomSource(0))
    _, cache = M.forward(params, [1, 2, 3, 4, 5, 6, 7])
    assert cache.H.shape == (7, 5)
    assert cache.conv_out.shape == (2, 6, 4)
    assert all(L.maxpool2d(O, 2, 2).shape == (6,) for O in cache.conv_out)
    assert cache.h_star.shape == (2 * 6,)


@pytest.mark.acceptance("overfit: 32-example 2-class corpus, 100% train acc and loss < 0.05 in 200 epochs, < 2 min")
def test_overfit_toy_corpus():
    start = time.perf_counter()
    examples, labels = D.parse_lines(toy_binary(32, seed=0))
    corpus = T.Corpus(examples, examples, labels, D.build_vocab(examples))
    cfg = RunConfig(d_w=16, hidden=16, epochs=200, seed=1)
    res = T.train(cfg, corpus)
    final = C.Checkpoint(res.checkpoint.config, corpus.vocab, labels, res.final_params)
    ev = T.evaluate(final, examples)
    elapsed = time.perf_counter() - start
    print(f"final train acc {ev.score}, eval loss {ev.loss:.4f}, epoch loss {res.history[-1].train_loss:.4f}, {elapsed:.0f}s")
    assert ev.score == 1.0
    assert ev.loss < 0.05
    assert res.history[-1].train_loss < 0.05
    assert elapsed < 120


@pytest.mark.acceptance("AdaDelta first step with g=1, rho=0.95, eps=1e-6 is -0.0044721 (1e-6)")
def test_adadelta_closed_form():
    arch = M.Architecture("blstm", vocab_size=2, d_w=1, hidden=1, n_classes=2)
    params = M.ModelParams(arch, {"theta": np.zeros(1)})
    state = AdaDeltaState.for_params(params, rho=0.95, eps=1e-6, lr=1.0)
    adadelta_update(params, {"theta": np.ones(1)}, state)
    assert abs(params["theta"][0] - (-0.0044721)) < 1e-6


@pytest.mark.acceptance("determinism: identical logs and checkpoint bytes; worker pool matches bitwise")
def test_determinism(tmp_path):
    path = tmp_path / "toy.tsv"
    path.write_text("".join(toy_binary(40, seed=5)))
    cfg = RunConfig(d_w=8, hidden=8, n_filters=3, epochs=3, seed=7, train=str(path))
    a, b = T.train(cfg), T.train(cfg)
    c = T.train(cfg.replace(workers=4))
    assert a.log_text() == b.log_text() == c.log_text()
    assert C.to_bytes(a.checkpoint) == C.to_bytes(b.checkpoint) == C.to_bytes(c.checkpoint)


@pytest.fixture(scope="module")
def trec_run():
    train_lines, test_lines = trec_like(5452, 500, seed=0)
    train, labels = D.parse_lines(train_lines)
    test, _ = D.parse_lines(test_lines, labels=labels, frozen_labels=True)
    cfg = RunConfig(variant="blstm-2dcnn", d_w=50, hidden=50, n_filters=10, filter=(3, 3),
                    pool=(2, 2), epochs=10, batch_size=10, seed=1)
    start = time.perf_counter()
    res = T.train(cfg, T.load_corpus(cfg, train, labels))
    elapsed = time.perf_counter() - start
    return res, test, elapsed


@pytest.mark.acceptance("scaled TREC-format run: test accuracy >= 0.80 within 15 min")
def test_scaled_trec(trec_run):
    res, test, elapsed = trec_run
    ev = T.evaluate(res.checkpoint, test)
    print(f"test accuracy {ev.score:.3f} after {elapsed:.0f}s")
    assert len(test) == 500 and len(res.checkpoint.labels) == 6
    assert ev.score >= 0.80
    assert elapsed <= 15 * 60


@pytest.mark.acceptance("length analysis: buckets partition the test set; weighted mean = accuracy (1e-12)")
def test_length_analysis_partition(trec_run):
    res, test, _ = trec_run
    rows = T.analyze_length([res.checkpoint], test, window=2)
    assert sum(r.count for r in rows) == len(test)
    assert len({r.length for r in rows}) == len(rows)
    overall = T.evaluate(res.checkpoint, test).score
    weighted = sum(r.count * r.exact_accuracy for r in rows) / len(test)
    assert abs(weighted - overall) <= 1e-12
    assert all(0.0 <= r.window_accuracy <= 1.0 for r in rows)


@pytest.mark.acceptance("metrics: hand confusion macro-F1 = 1/3; perfect predictions score 1.0")
def test_metric_correctness():
    assert metrics.macro_f1([0, 1], [0, 0]) == 1 / 3
    gold = [0, 1, 2, 2, 1]
    assert metrics.accuracy(gold, gold) == 1.0
    assert metrics.macro_f1(gold, gold) == 1.0
