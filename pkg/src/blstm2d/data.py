"""Corpus parsing, vocabulary, pretrained embeddings, splits and batching.

Corpus files hold one example per line as ``label<TAB>space separated tokens``.
Embedding files hold ``token v1 ... vd`` per line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernel import RandomSource, uniform_init

UNK = "<unk>"


class DataError(ValueError):
    """Malformed corpus or embedding file."""


@dataclass
class LabeledExample:
    tokens: list
    label: int

    def __post_init__(self):
        if not self.tokens:
            raise DataError("example has no tokens")


@dataclass
class LabelMap:
    names: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {n: i for i, n in enumerate(self.names)}

    def add(self, name: str) -> int:
        if name not in self._index:
            self._index[name] = len(self.names)
            self.names.append(name)
        return self._index[name]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown label {name!r}") from None

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._index


def parse_lines(lines, lowercase: bool = False, labels: LabelMap | None = None,
                frozen_labels: bool = False, max_len: int | None = None, source: str = "<input>"):
    labels = LabelMap() if labels is None else labels
    examples = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if "\t" not in line:
            raise DataError(f"{source}:{lineno}: expected 'label<TAB>text'")
        label, text = line.split("\t", 1)
        if lowercase:
            text = text.lower()
        tokens = text.split()
        if not tokens:
            raise DataError(f"{source}:{lineno}: no tokens after the label")
        if max_len is not None:
            tokens = tokens[:max_len]
        idx = labels.index(label) if frozen_labels else labels.add(label)
        examples.append(LabeledExample(tokens, idx))
    return examples, labels


def parse_dataset(path, lowercase: bool = False, labels: LabelMap | None = None,
                  frozen_labels: bool = False, max_len: int | None = None):
    """Read a corpus file; labels get dense indices in first-appearance order."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_lines(fh, lowercase, labels, frozen_labels, max_len, source=str(path))


def serialize(examples, labels: LabelMap) -> str:
    return "".join(f"{labels.names[e.label]}\t{' '.join(e.tokens)}\n" for e in examples)


class Vocabulary:
    """Token <-> index map; index 0 is the reserved unknown token."""

    def __init__(self, tokens=()):
        self.itos = [UNK]
        self.stoi = {UNK: 0}
        for t in tokens:
            self.add(t)

    @classmethod
    def from_list(cls, itos) -> "Vocabulary":
        if not itos or itos[0] != UNK:
            raise DataError("vocabulary must start with the unknown token")
        vocab = cls()
        for t in itos[1:]:
            vocab.add(t)
        return vocab

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def lookup(self, token: str) -> int:
        return self.stoi.get(token, 0)

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.stoi.get(t, 0) for t in tokens], dtype=np.int64)


def build_vocab(examples) -> Vocabulary:
    if not examples:
        raise DataError("cannot build a vocabulary from no examples")
    vocab = Vocabulary()
    for ex in examples:
        for t in ex.tokens:
            vocab.add(t)
    return vocab


def load_pretrained(path, vocab: Vocabulary, d_w: int, rng: RandomSource):
    """Embedding table for ``vocab``; uncovered rows drawn from U[-0.1, 0.1].

    Returns ``(table, covered)``.  The random rows are drawn for the whole
    table first so the result does not depend on file order.
    """
    table = uniform_init(len(vocab), d_w, -0.1, 0.1, rng)
    covered = set()
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            token = parts[0]
            idx = vocab.stoi.get(token)
            if idx is None or idx == 0 or idx in covered:
                continue
            if len(parts) - 1 != d_w:
                raise DataError(
                    f"{path}:{lineno}: vector for {token!r} has {len(parts) - 1} values, expected {d_w}"
                )
            try:
                table[idx] = [float(v) for v in parts[1:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value in vector for {token!r}") from None
            covered.add(idx)
    return table, len(covered)


@dataclass
class DatasetSplit:
    train: list
    dev: list
    test: list = field(default_factory=list)
    fold: int | None = None


def make_splits(examples, mode: str, param, rng: RandomSource):
    """``mode='dev'``: one split carving ``param`` (a fraction) off as dev.

    ``mode='cv'``: a list of ``param`` splits; fold i is the test set of
    split i and the rest is train (dev left empty for the caller to carve).
    """
    n = len(examples)
    order = rng.permutation(n)
    if mode == "dev":
        frac = float(param)
        if not 0.0 < frac < 1.0:
            raise ValueError(f"dev fraction must be in (0, 1), got {frac}")
        n_dev = int(round(n * frac))
        dev = [examples[i] for i in sorted(order[:n_dev])]
        train = [examples[i] for i in sorted(order[n_dev:])]
        return DatasetSplit(train, dev)
    if mode == "cv":
        k = int(param)
        if k < 2 or k > n:
            raise ValueError(f"fold count must be in [2, {n}], got {param}")
        bounds = [n * i // k for i in range(k + 1)]
        # larger folds first: fold sizes differ by at most one
        sizes = sorted((bounds[i + 1] - bounds[i] for i in range(k)), reverse=True)
        starts = np.concatenate([[0], np.cumsum(sizes)])
        folds = [sorted(order[starts[i]:starts[i + 1]]) for i in range(k)]
        out = []
        for i, fold in enumerate(folds):
            held = set(fold)
            out.append(DatasetSplit(
                train=[examples[j] for j in range(n) if j not in held],
                dev=[],
                test=[examples[j] for j in fold],
                fold=i,
            ))
        return out
    raise ValueError(f"unknown split mode {mode!r}")


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return RandomSource(seed).spawn(epoch).permutation(n)


def minibatches(examples, size: int, seed: int, epoch: int = 0):
    """Shuffle by (seed, epoch) and chunk; the last batch may be short."""
    if size < 1:
        raise ValueError("batch size must be >= 1")
    order = epoch_order(len(examples), seed, epoch)
    return [[examples[i] for i in order[s : s + size]] for s in range(0, len(order), size)]
