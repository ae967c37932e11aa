import numpy as np
import pytest

from blstm2d import checkpoint as C
from blstm2d import data as D
from blstm2d import training as T
from blstm2d.config import RunConfig
from blstm2d.model import ConfigError

from corpora import toy_binary, trec_like

SMALL = dict(d_w=8, hidden=8, n_filters=2, filter=(2, 2), pool=(2, 2), batch_size=4)


@pytest.fixture
def toy(tmp_path):
    path = tmp_path / "toy.tsv"
    path.write_text("".join(toy_binary(40, seed=2)), encoding="utf-8")
    return path


def test_zero_epochs_returns_initial_params(toy):
    cfg = RunConfig(epochs=0, train=str(toy), **SMALL)
    res = T.train(cfg)
    assert res.history == []
    init = T.train(cfg).checkpoint.params
    for name in init.tensors:
        assert init[name].tobytes() == res.checkpoint.params[name].tobytes()


def test_logs_are_deterministic_and_metrics_in_range(toy):
    cfg = RunConfig(epochs=3, train=str(toy), seed=4, **SMALL)
    a, b = T.train(cfg), T.train(cfg)
    assert a.log_text() == b.log_text()
    assert C.to_bytes(a.checkpoint) == C.to_bytes(b.checkpoint)
    assert len(a.history) == 3
    assert all(0.0 <= r.dev_metric <= 1.0 for r in a.history)
    fields = a.log_text().splitlines()[0].split("\t")
    assert len(fields) == 3 and fields[0] == "1"


def test_best_epoch_is_first_of_ties(toy):
    res = T.train(RunConfig(epochs=4, train=str(toy), **SMALL))
    best = max(r.dev_metric for r in res.history)
    assert res.best_epoch == next(r.epoch for r in res.history if r.dev_metric == best)


def test_worker_pool_is_bitwise_identical(toy):
    cfg = RunConfig(epochs=2, train=str(toy), **SMALL)
    a = T.train(cfg)
    b = T.train(cfg.replace(workers=3))
    assert a.log_text() == b.log_text()
    assert C.to_bytes(a.checkpoint) == C.to_bytes(b.checkpoint)


def test_explicit_dev_file_and_unknown_dev_label(toy, tmp_path):
    dev = tmp_path / "dev.tsv"
    dev.write_text("pos\tgood film\nneg\tbad film\n")
    res = T.train(RunConfig(epochs=1, train=str(toy), dev=str(dev), **SMALL))
    assert len(res.history) == 1
    dev.write_text("meh\tfilm\n")
    with pytest.raises(D.DataError):
        T.train(RunConfig(epochs=1, train=str(toy), dev=str(dev), **SMALL))


def test_pool_larger_than_map_is_config_error(toy):
    with pytest.raises(ConfigError):
        T.train(RunConfig(epochs=1, train=str(toy), **{**SMALL, "pool": (2, 9)}))


def test_pretrained_embeddings_used(toy, tmp_path):
    emb = tmp_path / "vec.txt"
    emb.write_text("good " + " ".join(["0.05"] * 8) + "\n")
    res = T.train(RunConfig(epochs=0, train=str(toy), embeddings=str(emb), **SMALL))
    ck = res.checkpoint
    assert res.covered == 1
    assert ck.params["embed"][ck.vocab.lookup("good")].tolist() == [0.05] * 8


def test_evaluate_unknown_label(toy, tmp_path):
    ck = T.train(RunConfig(epochs=0, train=str(toy), **SMALL)).checkpoint
    bad = tmp_path / "t.tsv"
    bad.write_text("other\tgood\n")
    with pytest.raises(D.DataError):
        T.read_eval_corpus(ck, bad)


def test_analyze_length_partition_and_windows():
    train_lines, test_lines = trec_like(300, 120, seed=3)
    ex, labels = D.parse_lines(train_lines)
    test, _ = D.parse_lines(test_lines, labels=labels, frozen_labels=True)
    cfg = RunConfig(epochs=1, variant="blstm", **SMALL)
    ckpts = [T.train(cfg.replace(seed=s), T.load_corpus(cfg.replace(seed=s), ex, labels)).checkpoint
             for s in (1, 2)]
    rows = T.analyze_length(ckpts, test)
    assert sum(r.count for r in rows) == len(test)
    overall = np.mean([T.evaluate(c, test).score for c in ckpts])
    weighted = sum(r.count * r.exact_accuracy for r in rows) / len(test)
    assert abs(weighted - overall) < 1e-12
    lengths = np.array([len(e.tokens) for e in test])
    correct = [T.evaluate(c, test) for c in ckpts]
    r = rows[len(rows) // 2]
    near = np.abs(lengths - r.length) <= 2
    for run, ev in zip(r.runs, correct):
        assert run == pytest.approx(np.mean(ev.pred[near] == ev.gold[near]), abs=1e-15)
    assert all(0 <= x.window_accuracy <= 1 for x in rows)


def test_analyze_length_single_bucket():
    lines = [f"{'ab'[i % 2]}\t{' '.join(['w'] * 10)}\n" for i in range(6)]
    ex, labels = D.parse_lines(lines)
    ck = T.train(RunConfig(epochs=0, variant="blstm", **SMALL), T.Corpus(ex, ex, labels, D.build_vocab(ex))).checkpoint
    rows = T.analyze_length([ck], ex)
    assert len(rows) == 1 and rows[0].count == 6 and rows[0].length == 10


def test_sweep_grid(toy):
    cfg = RunConfig(epochs=1, train=str(toy), **SMALL)
    rows = T.sweep(cfg, [2, 3])
    assert [(r.filter_size, r.pool_size) for r in rows] == [(2, 2), (2, 3), (3, 2), (3, 3)]
    assert all(r.dev_metric is not None and 0 <= r.dev_metric <= 1 for r in rows)


def test_sweep_marks_infeasible_cells(toy):
    rows = T.sweep(RunConfig(epochs=1, train=str(toy), **SMALL), [2, 8])
    skipped = {(r.filter_size, r.pool_size) for r in rows if r.dev_metric is None}
    assert (8, 8) in skipped and (2, 2) not in skipped


def test_cross_validation(toy):
    ex, labels = D.parse_dataset(toy)
    results, mean, std = T.cross_validate(RunConfig(epochs=1, cv=3, **SMALL), ex, labels)
    assert [r.fold for r in results] == [0, 1, 2]
    assert mean == pytest.approx(np.mean([r.score for r in results]))
    assert std >= 0
