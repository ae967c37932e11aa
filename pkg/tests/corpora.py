"""Synthetic corpora in the ``label<TAB>text`` format used by the tests."""
from __future__ import annotations

import numpy as np

POSITIVE = "good great fine nice superb lovely".split()
NEGATIVE = "bad awful poor nasty dull weak".split()
FILLER = "the movie was a plot and it film".split()


def toy_binary(n: int = 32, seed: int = 0) -> list:
    """Alternating pos/neg lines; the class is carried by one cue word."""
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n):
        y = i % 2
        cue = rng.choice(POSITIVE if y else NEGATIVE)
        toks = list(rng.choice(FILLER, rng.integers(3, 7))) + [cue]
        toks += list(rng.choice(FILLER, rng.integers(0, 3)))
        lines.append(f"{'pos' if y else 'neg'}\t{' '.join(toks)}\n")
    return lines


# coarse question types with their share of the real training set
_TREC_CLASSES = {"ABBR": 86, "DESC": 1162, "ENTY": 1250, "HUM": 1223, "LOC": 835, "NUM": 896}

_TEMPLATES = {
    "ABBR": [
        "What does {acro} stand for ?",
        "What is the abbreviation for {np} ?",
        "What is the full form of {acro} ?",
        "What does the abbreviation {acro} mean ?",
    ],
    "DESC": [
        "What is {np} ?",
        "Why do {np} {verb} ?",
        "How does {np} {verb} ?",
        "What is the definition of {np} ?",
        "What does {np} mean ?",
        "Why is {np} {adj} ?",
    ],
    "ENTY": [
        "What {thing} {verb} {np} ?",
        "Name a {thing} that {verb} {np} .",
        "What kind of {thing} is {np} ?",
        "What is the {adj} {thing} in {np} ?",
        "Which {thing} did {np} {verb} ?",
    ],
    "HUM": [
        "Who {verb} {np} ?",
        "What {person} {verb} {np} ?",
        "Who was the first {person} to {verb} {np} ?",
        "Name the {person} who {verb} {np} .",
        "Who is the {adj} {person} of {np} ?",
    ],
    "LOC": [
        "Where is {np} ?",
        "What {place} is {np} in ?",
        "Where did {np} {verb} ?",
        "What is the {adj} {place} in {np} ?",
        "Which {place} has {np} ?",
    ],
    "NUM": [
        "How many {np} {verb} ?",
        "When did {np} {verb} ?",
        "How much does {np} cost ?",
        "What year did {np} {verb} ?",
        "How long is {np} ?",
        "How far is {np} from {np} ?",
    ],
}

_SLOTS = {
    "thing": "animal color food sport instrument plant drug language disease game book product".split(),
    "person": "man woman president actor author inventor king queen scientist singer".split(),
    "place": "country city state river mountain continent island ocean capital".split(),
    "adj": "largest best famous oldest first highest main biggest popular".split(),
    "verb": "invent discover win play make live use build eat write".split(),
}


def _word(rng, vocab_size: int) -> str:
    # Zipf-ish draw from a fixed filler vocabulary
    return f"w{min(int(rng.zipf(1.3)), vocab_size)}"


def trec_like(n_train: int = 5452, n_test: int = 500, seed: int = 0, noise: float = 0.03):
    """Question-style corpus with six TREC-style coarse labels.

    Class is signalled by wh-word templates and slot words, with shared
    "What is ..." style openings and a small fraction of swapped labels so
    the task is not trivially separable.  Returns ``(train_lines, test_lines)``.
    """
    rng = np.random.default_rng(seed)
    names = list(_TREC_CLASSES)
    weights = np.array(list(_TREC_CLASSES.values()), dtype=float)
    weights /= weights.sum()

    def np_phrase():
        n = int(rng.integers(1, 6))
        words = [_word(rng, 3000) for _ in range(n)]
        if rng.random() < 0.5:
            words.insert(0, "the")
        if rng.random() < 0.15:
            words += ["of", "the"] + [_word(rng, 3000) for _ in range(int(rng.integers(1, 8)))]
        return " ".join(words)

    def make(label):
        text = rng.choice(_TEMPLATES[label])
        while "{" in text:
            start = text.index("{")
            end = text.index("}", start)
            slot = text[start + 1 : end]
            if slot == "np":
                fill = np_phrase()
            elif slot == "acro":
                fill = "".join(rng.choice(list("ABCDEFGHIJKLMNOPRSTUVW"), int(rng.integers(2, 5))))
            else:
                fill = rng.choice(_SLOTS[slot])
            text = text[:start] + fill + text[end + 1 :]
        if rng.random() < noise:
            label = rng.choice(names)
        return f"{label}\t{text}\n"

    lines = [make(rng.choice(names, p=weights)) for _ in range(n_train + n_test)]
    return lines[:n_train], lines[n_train:]
