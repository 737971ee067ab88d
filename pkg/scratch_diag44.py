"""Factorize seed 44's stuck noise-mode attack: init vs stream."""
import numpy as np

import freqshield.data as data_mod
from freqshield.data import SynthConfig, gen_synthetic, batches, eval_batches
from freqshield.engine import (
    ArlConfig, train_arl, derive_seed, _TAG_ATTACKER, _TAG_ATTACK_BATCHES)
from freqshield.models import ClassifierModel, initialize_parameters
from freqshield.autodiff import Tape, backward
from freqshield.ops import softmax_cross_entropy
from freqshield.metrics import accuracy
from freqshield.optim import Adam

data_mod._STRIPE_AMP = 0.25
split = gen_synthetic(SynthConfig(n_examples=512, seed=42))

cfg = ArlConfig(mode="noise", seed=44)
system = train_arl(cfg, split)


def attack(init_seed, stream_seed, epochs=10):
    obf = system.obfuscator
    model = ClassifierModel(split.image_shape[0], split.privacy_classes)
    initialize_parameters(model, derive_seed(init_seed, _TAG_ATTACKER))
    opt = Adam(model.parameters(), lr=cfg.lr_classifiers)
    batch_seed = derive_seed(stream_seed, _TAG_ATTACK_BATCHES)
    for epoch in range(epochs):
        for xb, yt, yp in batches(split.train, cfg.batch_size, batch_seed, epoch):
            view = obf(xb)
            with Tape():
                loss = softmax_cross_entropy(model(view), yp)
                backward(loss)
            opt.step()
    corr, n = 0, 0
    for xb, _, yp in eval_batches(split.test):
        logits = model(obf(xb))
        corr += round(accuracy(logits, yp) * len(yp) / 100.0)
        n += len(yp)
    return 100.0 * corr / n


for init_s, stream_s in ((44, 44), (45, 44), (44, 45), (46, 44), (44, 46)):
    print(f"init={init_s} stream={stream_s} "
          f"priv={attack(init_s, stream_s):.2f}", flush=True)
