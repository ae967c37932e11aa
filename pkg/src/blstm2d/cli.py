"""Command-line entry point: ``blstm2d <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import checkpoint as C
from . import data as D
from . import training as T
from .config import RunConfig, load_config, parse_value
from .gradients import finite_diff_check
from .kernel import RandomSource
from .checkpoint import architecture
from .model import VARIANTS, ConfigError, forward, init_params

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_GRADCHECK = 0, 1, 2, 3

GRADCHECK_TOL = 1e-4
GRADCHECK_MAX_HIDDEN = 16
GRADCHECK_MAX_LEN = 12
GRADCHECK_DEFAULTS = {"d_w": 8, "hidden": 8, "n_filters": 2, "filter": (2, 2), "pool": (2, 2)}

log = logging.getLogger("blstm2d")

# (flag, config key) pairs accepted by every command
_OVERRIDES = [
    ("--variant", "variant"), ("--d-w", "d_w"), ("--hidden", "hidden"),
    ("--n-filters", "n_filters"), ("--filter", "filter"), ("--pool", "pool"),
    ("--dropout-embed", "dropout_embed"), ("--dropout-blstm", "dropout_blstm"),
    ("--dropout-penult", "dropout_penult"), ("--lambda", "lambda"),
    ("--batch-size", "batch_size"), ("--epochs", "epochs"), ("--seed", "seed"),
    ("--metric", "metric"), ("--lr", "lr"), ("--rho", "rho"), ("--eps", "eps"),
    ("--activation", "activation"), ("--lowercase", "lowercase"), ("--max-len", "max_len"),
    ("--seq-len", "seq_len"), ("--dev-fraction", "dev_fraction"), ("--cv", "cv"),
    ("--workers", "workers"), ("--train", "train"), ("--dev", "dev"), ("--test", "test"),
    ("--embeddings", "embeddings"), ("--checkpoint", "checkpoint"),
]


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="'key = value' config file")
    g = p.add_argument_group("config overrides")
    for flag, key in _OVERRIDES:
        g.add_argument(flag, dest=f"cfg_{key}", metavar="V", default=None)


def _config(args) -> RunConfig:
    overrides = {}
    for _, key in _OVERRIDES:
        v = getattr(args, f"cfg_{key}", None)
        if v is not None:
            name, value = parse_value(key, v)
            overrides[name] = value
    return load_config(args.config, overrides)


def _out(line: str):
    sys.stdout.write(line + "\n")
    sys.stdout.flush()


def cmd_train(args) -> int:
    cfg = _config(args)
    if cfg.cv:
        examples, labels = D.parse_dataset(cfg.train, cfg.lowercase, max_len=cfg.max_len)
        results, mean, std = T.cross_validate(cfg, examples, labels)
        _out("fold\tscore")
        for r in results:
            _out(f"{r.fold}\t{r.score!r}")
        _out(f"mean\t{mean!r}")
        _out(f"std\t{std!r}")
        return EXIT_OK
    if cfg.checkpoint is None:
        raise ConfigError("train needs --checkpoint PATH to write the best model")
    corpus = T.load_corpus(cfg)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None

    def on_epoch(rec):
        line = rec.line()
        if log_fh:
            log_fh.write(line + "\n")
            log_fh.flush()
        else:
            _out(line)

    try:
        res = T.train(cfg, corpus, on_epoch=on_epoch)
    finally:
        if log_fh:
            log_fh.close()
    C.save(res.checkpoint, cfg.checkpoint)
    log.info("best epoch %d, dev %s=%s; wrote %s", res.best_epoch, cfg.metric,
             res.best_metric, cfg.checkpoint)
    if cfg.test:
        ev = T.evaluate(res.checkpoint, T.read_eval_corpus(res.checkpoint, cfg.test), cfg.metric)
        log.info("test %s = %.4f", cfg.metric, ev.score)
    return EXIT_OK


def _load_ckpt(path):
    if not path:
        raise ConfigError("--checkpoint is required")
    return C.load(path)


def cmd_evaluate(args) -> int:
    ckpt = _load_ckpt(args.cfg_checkpoint)
    metric = args.cfg_metric or ckpt.config.metric
    examples = T.read_eval_corpus(ckpt, args.corpus)
    ev = T.evaluate(ckpt, examples, metric)
    _out(f"{metric}\t{ev.score!r}")
    if args.predictions:
        _out("index\tgold\tpredicted")
        for i, (g, p) in enumerate(zip(ev.gold, ev.pred)):
            _out(f"{i}\t{ckpt.labels.names[g]}\t{ckpt.labels.names[p]}")
    return EXIT_OK


def cmd_predict(args) -> int:
    ckpt = _load_ckpt(args.cfg_checkpoint)
    _out("index\tpredicted\tprobability")
    with open(args.corpus, encoding="utf-8") as fh:
        i = 0
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            text = line.split("\t", 1)[1] if "\t" in line else line
            if ckpt.config.lowercase:
                text = text.lower()
            tokens = text.split()
            if not tokens:
                raise D.DataError(f"{args.corpus}: line {i + 1} has no tokens")
            probs, _ = forward(ckpt.params, ckpt.vocab.encode(tokens))
            k = int(np.argmax(probs))
            _out(f"{i}\t{ckpt.labels.names[k]}\t{probs[k]!r}")
            i += 1
    return EXIT_OK


def cmd_analyze_length(args) -> int:
    ckpts = [C.load(p) for p in args.checkpoints]
    if args.runs is not None and args.runs != len(ckpts):
        raise ConfigError(f"--runs {args.runs} but {len(ckpts)} checkpoints given")
    examples = T.read_eval_corpus(ckpts[0], args.corpus)
    rows = T.analyze_length(ckpts, examples, args.window)
    header = ["length", "count", "accuracy_exact", "accuracy_window"]
    header += [f"run_{i + 1}" for i in range(len(ckpts))]
    _out("\t".join(header))
    for r in rows:
        _out(r.line())
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    sizes = [int(s) for s in args.sizes.split(",")]
    _out("filter\tpool\tdev_" + cfg.metric)
    T.sweep(cfg, sizes, on_row=lambda r: _out(r.line()))
    return EXIT_OK


def gradcheck_report(cfg: RunConfig, variants, length: int, samples: int, epsilon: float,
                     corrupt: str | None = None):
    """Finite-difference check on a synthetic example for each variant.

    Returns a list of ``(variant, GroupReport)``.
    """
    if cfg.hidden > GRADCHECK_MAX_HIDDEN or length > GRADCHECK_MAX_LEN:
        raise ConfigError(
            f"gradcheck is limited to hidden <= {GRADCHECK_MAX_HIDDEN} and length <= {GRADCHECK_MAX_LEN}"
        )
    rows = []
    for variant in variants:
        rng = RandomSource(cfg.seed)
        vcfg = cfg.replace(variant=variant, seq_len=length if variant.startswith("blstm-2d") else None)
        arch = architecture(vcfg, 20, 3)
        params = init_params(arch, rng.spawn(1))
        tokens = rng.spawn(2).generator.integers(1, 20, length)
        target = int(rng.spawn(3).generator.integers(0, 3))
        _, cache = forward(params, tokens, mode="train", rng=rng.spawn(4))
        for rep in finite_diff_check(params, tokens, target, lam=cfg.lam, epsilon=epsilon,
                                     samples_per_tensor=samples, masks=cache.masks,
                                     rng=rng.spawn(5), corrupt=corrupt):
            rows.append((variant, rep))
    return rows


def cmd_gradcheck(args) -> int:
    # model sizes come from the small defaults unless given on the command line
    cfg = _config(args)
    for key, value in GRADCHECK_DEFAULTS.items():
        if getattr(args, f"cfg_{key}", None) is None:
            cfg = cfg.replace(**{key: value})
    variants = VARIANTS if args.all_variants else (cfg.variant,)
    rows = gradcheck_report(cfg, variants, args.length, args.samples, args.epsilon, args.corrupt)
    _out("variant\tgroup\tmax_rel_error\tstatus")
    failed = False
    for variant, rep in rows:
        ok = rep.passed(GRADCHECK_TOL)
        failed |= not ok
        _out(f"{variant}\t{rep.name}\t{rep.max_rel_error:.3e}\t{'pass' if ok else 'FAIL'}")
    return EXIT_GRADCHECK if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blstm2d", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model, keep the best dev epoch")
    _add_config_args(p)
    p.add_argument("--log", help="write the per-epoch TSV log here instead of stdout")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a labelled corpus")
    _add_config_args(p)
    p.add_argument("corpus")
    p.add_argument("--predictions", action="store_true", help="also print per-example predictions")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="label each line of a corpus")
    _add_config_args(p)
    p.add_argument("corpus")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _add_config_args(p)
    p.add_argument("--all-variants", action="store_true")
    p.add_argument("--length", type=int, default=5)
    p.add_argument("--samples", type=int, default=20, help="coordinates checked per tensor")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--corrupt", metavar="GROUP", help="flip the sign of one gradient (self-test)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("analyze-length", help="accuracy against sentence length")
    _add_config_args(p)
    p.add_argument("corpus")
    p.add_argument("checkpoints", nargs="+", help="one checkpoint per run")
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--runs", type=int)
    p.set_defaults(func=cmd_analyze_length)

    p = sub.add_parser("sweep", help="square filter x pool size grid")
    _add_config_args(p)
    p.add_argument("--sizes", default="2,3,4,5,6", help="comma-separated square sizes")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (D.DataError, C.CheckpointError, FileNotFoundError, UnicodeDecodeError) as e:
        code = getattr(e, "code", "data-error")
        print(f"error [{code}]: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
