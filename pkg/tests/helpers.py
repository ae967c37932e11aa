from blstm2d import model as M
from blstm2d.kernel import RandomSource


def small_model(variant, seed=0, h=8, d_w=8, l=5, n_classes=3, vocab=20, perturb=0.3, **kw):
    arch = M.Architecture(variant, vocab_size=vocab, d_w=d_w, hidden=h, n_classes=n_classes,
                          n_filters=kw.pop("n_filters", 2), filter=kw.pop("filter", (2, 2)),
                          pool=kw.pop("pool", (2, 2)),
                          seq_len=l if variant in ("blstm-2dpool", "blstm-2dcnn") else None, **kw)
    rng = RandomSource(seed)
    params = M.init_params(arch, rng)
    for t in params.tensors.values():
        t += rng.uniform(-perturb, perturb, t.shape)
    tokens = rng.generator.integers(1, vocab, l)
    return params, tokens
